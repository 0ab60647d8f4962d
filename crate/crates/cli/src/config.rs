//! Experiment configuration: a flat TOML file, command-line overrides, and
//! validation that points at the offending line or flag.
//!
//! ```toml
//! schema_version = 1
//! alpha = 0.5
//! d1 = 0.5
//! d2 = 0.5
//! drift = 0.0
//! eps = [0.4, 0.3, 0.2, 0.15, 0.1]
//! delta = 0.2
//! b = 1.5
//! eta = "auto"        # small-jump truncation for sample/quantize
//! cover_eta = "auto"  # truncation of the paths that are covered
//! paths = 500
//! a_samples = 10000
//! seed = 20240601
//! out = "out"
//! ```
//!
//! Every key except `schema_version` is optional and falls back to the value
//! shown. `eta = "auto"` keeps the expected truncation error below
//! `0.01·min ε`; `cover_eta = "auto"` is `min ε / 10`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mmentropy::StableParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Cap on the expected jump count of one sampled path.
pub const MAX_MEAN_JUMPS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaName {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaRule {
    Fixed(f64),
    Named(EtaName),
}

/// Everything that determines the numbers a run produces. The output
/// directory and thread count are deliberately absent: they never change
/// results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
    pub drift: f64,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub b: f64,
    pub eta: EtaRule,
    pub cover_eta: EtaRule,
    pub paths: usize,
    pub a_samples: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            alpha: 0.5,
            d1: 0.5,
            d2: 0.5,
            drift: 0.0,
            eps: vec![0.4, 0.3, 0.2, 0.15, 0.1],
            delta: 0.2,
            b: 1.5,
            eta: EtaRule::Named(EtaName::Auto),
            cover_eta: EtaRule::Named(EtaName::Auto),
            paths: 500,
            a_samples: 10_000,
            seed: 20_240_601,
        }
    }
}

impl ExperimentConfig {
    pub fn params(&self) -> CliResult<StableParams> {
        Ok(StableParams::new(self.alpha, self.d1, self.d2, self.drift)?)
    }

    pub fn eps_min(&self) -> f64 {
        self.eps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Truncation level of the small-jump part in `sample` and `quantize`.
    /// Refused when a path would carry more than [`MAX_MEAN_JUMPS`] jumps
    /// on average.
    pub fn sample_eta(&self) -> CliResult<f64> {
        let params = self.params()?;
        let eta = match self.eta {
            EtaRule::Fixed(v) => v,
            EtaRule::Named(EtaName::Auto) => params.default_eta(self.eps_min())?,
        };
        let mean_jumps = params.intensity_above(eta)?;
        if mean_jumps > MAX_MEAN_JUMPS {
            return Err(CliError::validation(format!(
                "eta: truncation {eta:e} means {mean_jumps:.3e} jumps per path (limit {MAX_MEAN_JUMPS:e}); set eta to a larger value"
            )));
        }
        Ok(eta)
    }

    /// Truncation level of the paths handed to the greedy cover.
    pub fn cover_eta(&self) -> f64 {
        match self.cover_eta {
            EtaRule::Fixed(v) => v,
            EtaRule::Named(EtaName::Auto) => self.eps_min() / 10.0,
        }
    }

    /// `sha256:<hex>` of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("validated config serializes")
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(&'static str),
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub eps: Option<Vec<f64>>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    source: Option<PathBuf>,
    origins: BTreeMap<&'static str, Origin>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<Spanned<i64>>,
    alpha: Option<Spanned<f64>>,
    d1: Option<Spanned<f64>>,
    d2: Option<Spanned<f64>>,
    drift: Option<Spanned<f64>>,
    eps: Option<Spanned<Vec<f64>>>,
    delta: Option<Spanned<f64>>,
    b: Option<Spanned<f64>>,
    eta: Option<Spanned<EtaRule>>,
    cover_eta: Option<Spanned<EtaRule>>,
    paths: Option<Spanned<i64>>,
    a_samples: Option<Spanned<i64>>,
    seed: Option<Spanned<i64>>,
    out: Option<Spanned<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Reads `path` (or the defaults when `None`), applies `overrides` and
/// validates the result.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Loaded> {
    let mut loaded = match path {
        None => Loaded {
            config: ExperimentConfig::default(),
            out: PathBuf::from("out"),
            source: None,
            origins: BTreeMap::new(),
        },
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse(&text, p)?
        }
    };
    loaded.apply(overrides);
    loaded.validate()?;
    Ok(loaded)
}

/// Parses config text; `source` only labels messages.
pub fn parse(text: &str, source: &Path) -> CliResult<Loaded> {
    let label = source.display().to_string();
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let at = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        CliError::validation(format!("{label}:{at}: {}", e.message().trim()))
    })?;

    let mut origins = BTreeMap::new();
    let mut ints = Vec::new();
    let d = ExperimentConfig::default();
    macro_rules! take {
        ($field:ident, $default:expr) => {
            match raw.$field {
                Some(s) => {
                    origins.insert(stringify!($field), Origin::Line(line_of(text, s.span().start)));
                    s.into_inner()
                }
                None => $default,
            }
        };
    }

    let Some(version) = raw.schema_version.as_ref().map(|s| *s.get_ref()) else {
        return Err(CliError::validation(format!("{label}:1: missing key `schema_version`")));
    };
    let _ = take!(schema_version, 0);
    ints.push(("schema_version", version));
    let paths = take!(paths, d.paths as i64);
    ints.push(("paths", paths));
    let a_samples = take!(a_samples, d.a_samples as i64);
    ints.push(("a_samples", a_samples));
    let seed = take!(seed, d.seed as i64);
    ints.push(("seed", seed));

    let mut loaded = Loaded {
        config: ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            alpha: take!(alpha, d.alpha),
            d1: take!(d1, d.d1),
            d2: take!(d2, d.d2),
            drift: take!(drift, d.drift),
            eps: take!(eps, d.eps.clone()),
            delta: take!(delta, d.delta),
            b: take!(b, d.b),
            eta: take!(eta, d.eta),
            cover_eta: take!(cover_eta, d.cover_eta),
            paths: paths.max(0) as usize,
            a_samples: a_samples.max(0) as usize,
            seed: seed.max(0) as u64,
        },
        out: PathBuf::from(take!(out, "out".to_string())),
        source: Some(source.to_path_buf()),
        origins,
    };

    let mut errors = Vec::new();
    if version != SCHEMA_VERSION as i64 {
        errors.push(loaded.msg("schema_version", format!("must be {SCHEMA_VERSION}, got {version}")));
    }
    for (key, v) in &ints[1..] {
        let min = if *key == "seed" { 0 } else { 1 };
        if *v < min {
            errors.push(loaded.msg(key, format!("must be >= {min}, got {v}")));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    loaded.config.schema_version = version as u32;
    Ok(loaded)
}

impl Loaded {
    fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.config.seed = seed;
            self.origins.insert("seed", Origin::Flag("--seed"));
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(eps) = &o.eps {
            self.config.eps = eps.clone();
            self.origins.insert("eps", Origin::Flag("--eps"));
        }
        if let Some(delta) = o.delta {
            self.config.delta = delta;
            self.origins.insert("delta", Origin::Flag("--delta"));
        }
    }

    fn msg(&self, key: &str, what: String) -> String {
        let at = match (self.origins.get(key), &self.source) {
            (Some(Origin::Line(n)), Some(src)) => format!("{}:{n}", src.display()),
            (Some(Origin::Flag(f)), _) => (*f).to_string(),
            _ => "default".to_string(),
        };
        format!("{at}: {key} {what}")
    }

    #[cfg(test)]
    fn origin(&self, key: &str) -> Option<Origin> {
        self.origins.get(key).cloned()
    }

    pub fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        let mut errors = Vec::new();
        let mut check = |ok: bool, key: &str, what: String| {
            if !ok {
                errors.push(self.msg(key, what));
            }
        };
        check(
            c.alpha > 0.0 && c.alpha < 1.0,
            "alpha",
            format!("must lie in (0, 1), got {}", c.alpha),
        );
        check(
            c.d1.is_finite() && c.d1 >= 0.0,
            "d1",
            format!("must be finite and >= 0, got {}", c.d1),
        );
        check(
            c.d2.is_finite() && c.d2 >= 0.0,
            "d2",
            format!("must be finite and >= 0, got {}", c.d2),
        );
        check(c.d1 + c.d2 > 0.0, "d2", "d1 + d2 must be positive".to_string());
        check(c.drift.is_finite(), "drift", format!("must be finite, got {}", c.drift));
        let b_min = 1f64.max(2.0 * c.alpha);
        check(
            c.b > b_min,
            "b",
            format!("must exceed max(1, 2 alpha) = {b_min}, got {}", c.b),
        );
        check(
            c.delta > 0.0 && c.delta < 1.0,
            "delta",
            format!("must lie in (0, 1), got {}", c.delta),
        );
        check(!c.eps.is_empty(), "eps", "must list at least one scale".to_string());
        for &e in &c.eps {
            check(e > 0.0 && e < 1.0, "eps", format!("values must lie in (0, 1), got {e}"));
        }
        let mut sorted = c.eps.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            check(false, "eps", format!("values must be distinct, {} repeats", w[0]));
        }
        let eps_min = c.eps_min();
        for (key, rule) in [("eta", c.eta), ("cover_eta", c.cover_eta)] {
            if let EtaRule::Fixed(v) = rule {
                check(
                    v > 0.0 && v < eps_min,
                    key,
                    format!("must be \"auto\" or lie in (0, min eps = {eps_min}), got {v}"),
                );
            }
        }
        check(c.paths >= 1, "paths", format!("must be >= 1, got {}", c.paths));
        check(
            c.a_samples >= 100,
            "a_samples",
            format!("must be >= 100, got {}", c.a_samples),
        );
        check(
            c.seed <= i64::MAX as u64,
            "seed",
            format!("must be at most {}, got {}", i64::MAX, c.seed),
        );
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> CliResult<Loaded> {
        let l = parse(text, Path::new("c.toml"))?;
        l.validate()?;
        Ok(l)
    }

    fn messages(r: CliResult<Loaded>) -> Vec<String> {
        match r {
            Err(CliError::Validation(m)) => m,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_validate() {
        let l = load(None, &Overrides::default()).unwrap();
        assert_eq!(l.config, ExperimentConfig::default());
    }

    #[test]
    fn minimal_file() {
        let l = parse_str("schema_version = 1\n").unwrap();
        assert_eq!(l.config, ExperimentConfig::default());
        assert_eq!(l.origin("alpha"), None);
    }

    #[test]
    fn values_and_lines() {
        let l = parse_str("schema_version = 1\n\nalpha = 0.7\neta = 1e-3\neps = [0.2, 0.1]\n").unwrap();
        assert_eq!(l.config.alpha, 0.7);
        assert_eq!(l.config.eta, EtaRule::Fixed(1e-3));
        assert_eq!(l.origin("alpha"), Some(Origin::Line(3)));
        assert_eq!(l.origin("eps"), Some(Origin::Line(5)));
    }

    #[test]
    fn alpha_out_of_range_names_line() {
        let m = messages(parse_str("schema_version = 1\nalpha = 1.2\n"));
        assert_eq!(m.len(), 2, "{m:?}");
        assert!(m[0].starts_with("c.toml:2: alpha"), "{m:?}");
        assert!(m[1].contains("b must exceed"), "{m:?}");
    }

    #[test]
    fn b_not_above_two_alpha() {
        let m = messages(parse_str("schema_version = 1\nalpha = 0.8\nb = 1.5\n"));
        assert!(
            m[0].starts_with("c.toml:3: b must exceed max(1, 2 alpha) = 1.6"),
            "{m:?}"
        );
        let m = messages(parse_str("schema_version = 1\nalpha = 0.3\nb = 1.0\n"));
        assert!(m[0].starts_with("c.toml:3: b"), "{m:?}");
    }

    #[test]
    fn delta_range() {
        for d in ["0.0", "1.0", "-0.1"] {
            let m = messages(parse_str(&format!("schema_version = 1\ndelta = {d}\n")));
            assert!(m[0].starts_with("c.toml:2: delta"), "{m:?}");
        }
    }

    #[test]
    fn eps_rules() {
        let m = messages(parse_str("schema_version = 1\neps = [0.1, 0.2, 0.1]\n"));
        assert!(m[0].contains("distinct"), "{m:?}");
        let m = messages(parse_str("schema_version = 1\neps = [0.1, -0.2]\n"));
        assert!(m[0].starts_with("c.toml:2: eps"), "{m:?}");
        let m = messages(parse_str("schema_version = 1\neps = []\n"));
        assert!(m[0].contains("at least one"), "{m:?}");
    }

    #[test]
    fn eta_must_be_below_eps() {
        let m = messages(parse_str("schema_version = 1\neps = [0.1]\ncover_eta = 0.5\n"));
        assert!(m[0].starts_with("c.toml:3: cover_eta"), "{m:?}");
    }

    #[test]
    fn sample_sizes() {
        let m = messages(parse_str("schema_version = 1\npaths = 0\n"));
        assert!(m[0].starts_with("c.toml:2: paths"), "{m:?}");
        let m = messages(parse_str("schema_version = 1\na_samples = 10\n"));
        assert!(m[0].starts_with("c.toml:2: a_samples"), "{m:?}");
    }

    #[test]
    fn syntax_and_unknown_keys() {
        let m = messages(parse_str("schema_version = 1\nalpha = = 3\n"));
        assert!(m[0].starts_with("c.toml:2:"), "{m:?}");
        let m = messages(parse_str("schema_version = 1\n\ngamma = 3\n"));
        assert!(m[0].starts_with("c.toml:3:") && m[0].contains("gamma"), "{m:?}");
        let m = messages(parse_str("alpha = 0.5\n"));
        assert!(m[0].contains("schema_version"), "{m:?}");
        let m = messages(parse_str("schema_version = 2\n"));
        assert!(m[0].starts_with("c.toml:1: schema_version"), "{m:?}");
    }

    #[test]
    fn flags_override_and_label() {
        let o = Overrides {
            delta: Some(1.5),
            ..Overrides::default()
        };
        let m = match load(None, &o) {
            Err(CliError::Validation(m)) => m,
            other => panic!("{other:?}"),
        };
        assert!(m[0].starts_with("--delta: delta"), "{m:?}");
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let c = ExperimentConfig {
            eta: EtaRule::Fixed(1e-4),
            ..ExperimentConfig::default()
        };
        let text = c.to_toml();
        let back = parse(&text, Path::new("x")).unwrap();
        assert_eq!(back.config, c);
        assert_eq!(back.config.hash(), c.hash());
        assert_ne!(ExperimentConfig::default().hash(), c.hash());
        assert!(c.hash().starts_with("sha256:") && c.hash().len() == 7 + 64);
    }

    #[test]
    fn eta_rules() {
        let c = ExperimentConfig::default();
        assert!((c.cover_eta() - 0.01).abs() < 1e-15);
        let eta = c.sample_eta().unwrap();
        assert!(eta > 0.0 && eta < 1e-3);
        let heavy = ExperimentConfig {
            alpha: 0.7,
            ..ExperimentConfig::default()
        };
        assert!(matches!(heavy.sample_eta(), Err(CliError::Validation(_))));
    }
}
