//! Run manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Profile;

#[derive(Serialize)]
struct Timing {
    stage: String,
    seconds: f64,
}

#[derive(Serialize)]
struct Versions {
    poleres: &'static str,
    cli: &'static str,
}

#[derive(Serialize)]
pub struct Manifest {
    command: String,
    config: String,
    config_sha256: String,
    profile: Profile,
    seed: Option<u64>,
    versions: Versions,
    timings: Vec<Timing>,
    outputs: Vec<String>,
    summary: serde_json::Map<String, serde_json::Value>,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn new(command: &str, config: &Path, text: &str, profile: Profile, seed: Option<u64>) -> Self {
        Manifest {
            command: command.into(),
            config: config.display().to_string(),
            config_sha256: sha256_hex(text),
            profile,
            seed,
            versions: Versions {
                poleres: poleres::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            timings: Vec::new(),
            outputs: Vec::new(),
            summary: serde_json::Map::new(),
        }
    }

    /// Runs `f` and records its wall-clock under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn output(&mut self, path: &Path) {
        let name = path.file_name().map(PathBuf::from).unwrap_or_else(|| path.to_path_buf());
        self.outputs.push(name.display().to_string());
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.summary.insert(key.into(), v);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
