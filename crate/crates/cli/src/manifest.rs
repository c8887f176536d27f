use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a mutating command did, with enough detail to run it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// SHA-256 of the effective configuration as canonical JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub toolkit_version: String,
    pub started_unix_ms: u128,
    pub wall_clock_secs: f64,
}

pub fn hash_json(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// Collects manifest fields while a command runs.
pub struct Recorder {
    command: &'static str,
    started: Instant,
    started_unix_ms: u128,
    config: serde_json::Value,
    config_hash: Option<String>,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(command: &'static str) -> Self {
        Recorder {
            command,
            started: Instant::now(),
            started_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            config: serde_json::Value::Null,
            config_hash: None,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    /// Overrides the default hash of `config`, e.g. with a checkpoint's own hash.
    pub fn config_hash(&mut self, hash: String) {
        self.config_hash = Some(hash);
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.to_string(), seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command.to_string(),
            args: std::env::args().skip(1).collect(),
            config_hash: self.config_hash.unwrap_or_else(|| hash_json(&self.config)),
            config: self.config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: self.started_unix_ms,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Writes the manifest to `explicit`, or next to `primary` as `<primary>.manifest.json`.
    pub fn write(self, explicit: Option<&Path>, primary: &Path) -> Result<PathBuf> {
        let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| default_path(primary));
        let manifest = self.finish();
        crate::io::write_text(&path, &serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}

pub fn default_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}
