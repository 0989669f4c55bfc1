use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one command: enough to rerun it and to check its outputs.
/// Output paths are relative to the directory holding the manifest.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    #[serde(skip)]
    root: PathBuf,
    pub command: String,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub elapsed_s: f64,
    pub outputs: Vec<OutputFile>,
    pub metrics: serde_json::Value,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, root: &Path, config: serde_json::Value) -> Self {
        Self {
            root: root.to_owned(),
            command: command.to_owned(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            seeds: Vec::new(),
            elapsed_s: 0.0,
            outputs: Vec::new(),
            metrics: serde_json::Value::Null,
            notes: Vec::new(),
        }
    }

    /// Hashes a file that has already been written.
    pub fn add_output(&mut self, path: &Path) -> CliResult<()> {
        let data = fs::read(path)?;
        self.outputs.push(OutputFile {
            path: path.strip_prefix(&self.root).unwrap_or(path).to_owned(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        });
        Ok(())
    }

    pub fn write(&self) -> CliResult<()> {
        fs::write(
            self.root.join("manifest.json"),
            serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}
