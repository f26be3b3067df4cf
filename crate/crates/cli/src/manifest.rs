use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use qerank_core::{Error, Result};

/// Record of one invocation: enough to re-run it and check the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<BTreeMap<String, String>>,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: None,
            inputs: BTreeMap::new(),
            seed,
            artifacts: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn config_text(&mut self, text: &str) {
        let map = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        self.config = Some(map);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    /// Writes `<primary>.manifest.json`, or prints to stderr when the run
    /// produced no file.
    pub fn emit(&self, primary: Option<&Path>) -> Result<()> {
        match primary {
            Some(p) => {
                let path = manifest_path(p);
                fs::write(&path, self.to_json() + "\n").map_err(|e| Error::Io { path, source: e })
            }
            None => {
                eprintln!("{}", self.to_json());
                Ok(())
            }
        }
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}
