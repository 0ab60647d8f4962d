use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmentropy"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(
        &p,
        "schema_version = 1\nalpha = 0.7\neps = [0.4, 0.3, 0.2, 0.15, 0.1]\neta = 1e-4\npaths = 80\na_samples = 1000\n",
    )
    .unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    for out in ["a", "b"] {
        for cmd in ["cover", "netbounds"] {
            let o = run(tmp.path(), &["--config", &cfg, "--out", out, "--seed", "7", cmd]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
    }
    for f in ["cover.csv", "netbounds.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between runs");
    }
    let other = run(tmp.path(), &["--config", &cfg, "--out", "c", "--seed", "8", "cover"]);
    assert!(other.status.success());
    assert_ne!(
        fs::read(tmp.path().join("a/cover.csv")).unwrap(),
        fs::read(tmp.path().join("c/cover.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    for (out, threads) in [("one", "1"), ("two", "2")] {
        let o = run(
            tmp.path(),
            &[
                "--config",
                &cfg,
                "--out",
                out,
                "--threads",
                threads,
                "--eps",
                "0.1",
                "quantize",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(tmp.path().join("one/quantize.jsonl")).unwrap(),
        fs::read(tmp.path().join("two/quantize.jsonl")).unwrap()
    );
}

#[test]
fn scaling_writes_parseable_csv_and_plot_data() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = run(tmp.path(), &["--config", &cfg, "--out", "s", "scaling"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("s");

    let mut reader = csv::Reader::from_path(dir.join("scaling.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "eps",
            "n_centers",
            "ln_n",
            "regressor",
            "fitted",
            "residual",
            "log_card_upper",
            "lower_bound"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        for field in r.iter().take(7) {
            field.parse::<f64>().unwrap();
        }
    }

    for dat in ["scaling.dat", "scaling_alpha.dat"] {
        let text = fs::read_to_string(dir.join(dat)).unwrap();
        let points: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(points.len(), 5, "{dat}");
        assert!(points.iter().all(|p| p.len() == 2 && p.iter().all(|v| v.is_finite())));
    }

    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("scaling_fit.json")).unwrap()).unwrap();
    assert!(fit["alpha_hat"].as_f64().unwrap().is_finite());
}

#[test]
fn manifest_replays_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = run(
        tmp.path(),
        &["--config", &cfg, "--out", "first", "--delta", "0.3", "cover"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let first = tmp.path().join("first");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "cover");
    assert_eq!(manifest["master_seed"], 20_240_601);
    assert_eq!(manifest["config"]["delta"], 0.3);
    assert!(manifest["config_hash"].as_str().unwrap().starts_with("sha256:"));
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["versions"]["mmentropy-core"].is_string());
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["config.toml", "cover.csv"]);

    let replay_cfg = first.join("config.toml").display().to_string();
    let o = run(tmp.path(), &["--config", &replay_cfg, "--out", "replay", "cover"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let replay = tmp.path().join("replay");
    assert_eq!(
        fs::read(first.join("cover.csv")).unwrap(),
        fs::read(replay.join("cover.csv")).unwrap()
    );
    let m2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(replay.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], m2["config_hash"]);
}

#[test]
fn invalid_configs_exit_1_with_line_numbers() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("schema_version = 1\nalpha = 1.0\nb = 2.5\n", "bad.toml:2: alpha"),
        ("schema_version = 1\nalpha = 0.0\n", "bad.toml:2: alpha"),
        ("schema_version = 1\n\nalpha = 0.75\nb = 1.5\n", "bad.toml:4: b"),
        ("schema_version = 1\ndelta = 1.0\n", "bad.toml:2: delta"),
        ("schema_version = 1\neps = [0.1, 0.1]\n", "bad.toml:2: eps"),
        ("schema_version = 1\nsamples = 3\n", "bad.toml:2:"),
        ("schema_version = 1\nalpha = \n", "bad.toml:2:"),
    ];
    for (text, expected) in cases {
        fs::write(tmp.path().join("bad.toml"), text).unwrap();
        let o = run(tmp.path(), &["--config", "bad.toml", "netbounds"]);
        assert_eq!(o.status.code(), Some(1), "{text:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(expected), "{text:?}: {}", stderr(&o));
    }
    fs::write(
        tmp.path().join("heavy.toml"),
        "schema_version = 1\nalpha = 0.7\neps = [0.1]\n",
    )
    .unwrap();
    let o = run(tmp.path(), &["--config", "heavy.toml", "--out", "h", "sample"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("eta: truncation"), "{}", stderr(&o));
    let o = run(tmp.path(), &["--delta", "0", "netbounds"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--delta: delta"), "{}", stderr(&o));
}

#[test]
fn io_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["--config", "missing.toml", "netbounds"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = run(tmp.path(), &["--out", "d", "distance", "f.json", "g.json"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn distance_reports_bracket_and_certificate() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("f.json"),
        r#"{"T":1.0,"a":0.0,"x0":0.0,"jumps":[[0.3,1.0],[0.6,-0.5]]}"#,
    )
    .unwrap();
    fs::write(
        tmp.path().join("g.json"),
        r#"{"T":1.0,"a":0.0,"x0":0.0,"jumps":[[0.35,1.1],[0.58,-0.5]]}"#,
    )
    .unwrap();
    let o = run(tmp.path(), &["--out", "d", "distance", "f.json", "g.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("d/distance.json")).unwrap()).unwrap();
    // time moves of 0.05 and 0.02 against a 0.1 level gap
    let (lo, hi) = (d["lower"].as_f64().unwrap(), d["upper"].as_f64().unwrap());
    assert!(lo <= 0.1 + 1e-9 && hi >= 0.1 - 1e-9 && hi - lo <= 1e-5, "{lo} {hi}");
    assert_eq!(d["certificate"]["relocated_times"].as_array().unwrap().len(), 2);

    fs::write(
        tmp.path().join("g.json"),
        r#"{"T":1.0,"a":0.0,"x0":0.0,"jumps":[[0.9,1.0],[0.2,1.0]]}"#,
    )
    .unwrap();
    let o = run(tmp.path(), &["--out", "d", "distance", "f.json", "g.json"]);
    assert_eq!(o.status.code(), Some(1), "unsorted jumps must be rejected");
}

#[test]
fn quantize_certifies_sampled_paths() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let args = ["--config", cfg.as_str(), "--eps", "0.1", "--out", "s", "sample"];
    let o = run(tmp.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        tmp.path(),
        &[
            "--config",
            &cfg,
            "--eps",
            "0.1",
            "--out",
            "q",
            "quantize",
            "--input",
            "s/paths.jsonl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("q/quantize.jsonl")).unwrap();
    let mut ok = 0;
    for line in text.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        if r["status"] == "ok" {
            ok += 1;
            assert_eq!(r["within_check"], "yes");
            assert!((r["certified_radius"].as_f64().unwrap() - 0.6).abs() < 1e-12);
            assert_eq!(r["code"]["kind"], "path");
        } else {
            assert!(r["flag"].is_string());
        }
    }
    assert_eq!(text.lines().count(), 80);
    assert!(ok > 40, "{ok} successes");
    let manifest = fs::read_to_string(tmp.path().join("q/manifest.json")).unwrap();
    assert!(manifest.contains("s/paths.jsonl"));
}

#[test]
fn check_passes_on_default_config() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["--out", "c", "check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 11, "{stdout}");
    assert!(tmp.path().join("c/check.txt").exists());
}
