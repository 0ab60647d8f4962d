//! Artifact writing. All files of a run go through one [`Artifacts`]
//! value, after the parallel work has finished.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
    inputs: Vec<InputFile>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "mmentropy-cli")]
    pub cli: &'static str,
    #[serde(rename = "mmentropy-core")]
    pub core: &'static str,
}

/// `manifest.json`: enough to replay the run bit for bit.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub manifest_version: u32,
    pub command: &'a str,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: &'a ExperimentConfig,
    pub inputs: Vec<InputFile>,
    pub versions: Versions,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Artifacts {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            inputs: Vec::new(),
        })
    }

    /// Reads an input file and records its digest for the manifest.
    pub fn read_input(&mut self, path: &Path) -> CliResult<String> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(text)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)
                .map_err(|e| CliError::io(self.dir.join(name), e.into()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(self.dir.join(name), e.into_error()))?;
        self.write(name, &bytes)
    }

    /// Two whitespace-separated columns under a `#` header.
    pub fn dat(&mut self, name: &str, columns: [&str; 2], points: &[(f64, f64)]) -> CliResult<()> {
        let mut s = format!("# {} {}\n", columns[0], columns[1]);
        for (x, y) in points {
            s.push_str(&format!("{x} {y}\n"));
        }
        self.write(name, s.as_bytes())
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> CliResult<()> {
        let mut buf = Vec::new();
        for r in rows {
            serde_json::to_writer(&mut buf, r).expect("records serialize");
            buf.push(b'\n');
        }
        self.write(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut buf = serde_json::to_vec_pretty(value).expect("records serialize");
        buf.push(b'\n');
        self.write(name, &buf)
    }

    /// Writes `config.toml` and `manifest.json`; call last.
    pub fn finish(mut self, command: &str, config: &ExperimentConfig, threads: usize, seconds: f64) -> CliResult<()> {
        self.write("config.toml", config.to_toml().as_bytes())?;
        let mut outputs = self.written.clone();
        outputs.sort();
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            command,
            config_hash: config.hash(),
            master_seed: config.seed,
            config,
            inputs: std::mem::take(&mut self.inputs),
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION"),
                core: mmentropy::VERSION,
            },
            threads,
            wall_time_seconds: seconds,
            outputs,
        };
        let path = self.dir.join("manifest.json");
        let mut f = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::to_writer_pretty(&mut f, &manifest).expect("manifest serializes");
        f.write_all(b"\n").map_err(|e| CliError::io(&path, e))
    }
}
