//! Run manifests: what was run, on which inputs, with which settings.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub duration_sec: f64,
    /// Training time of each replica, in seed order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica_durations_sec: Option<Vec<f64>>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Collects manifest fields while a subcommand runs.
pub struct Recorder {
    manifest: RunManifest,
    started: Instant,
}

impl Recorder {
    pub fn start(subcommand: &str) -> Self {
        Recorder {
            manifest: RunManifest {
                subcommand: subcommand.to_owned(),
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                seeds: Vec::new(),
                outputs: Vec::new(),
                duration_sec: 0.0,
                replica_durations_sec: None,
            },
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn config(&mut self, config: &impl Serialize) {
        self.manifest.config = serde_json::to_value(config).expect("config serializes to JSON");
    }

    pub fn seeds(&mut self, seeds: &[u64]) {
        self.manifest.seeds = seeds.to_vec();
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn replica_durations(&mut self, durations: Vec<f64>) {
        self.manifest.replica_durations_sec = Some(durations);
    }

    /// Writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> CliResult<()> {
        self.manifest.duration_sec = self.started.elapsed().as_secs_f64();
        write_json(path, &self.manifest)
    }
}

/// `<output>.manifest.json`.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::json(path, e))
}
