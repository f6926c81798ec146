use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub rows: usize,
    pub rejected: usize,
    pub seconds: f64,
}

/// Provenance record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    );
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, workers: Option<usize>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            workers,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            stages: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn stage(&mut self, name: &str, rows: usize, rejected: usize, started: Instant) {
        self.stages.push(StageRecord {
            name: name.to_string(),
            rows,
            rejected,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// `DIR/manifest.json` for directory outputs, `<file>.manifest.json`
    /// otherwise.
    pub fn path_for(output: &Path) -> PathBuf {
        if output.is_dir() {
            output.join("manifest.json")
        } else {
            let mut name = output.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            output.with_file_name(name)
        }
    }

    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let path = Self::path_for(output);
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(path)
    }

    /// Checks every recorded input digest against the file on disk.
    pub fn verify_inputs(&self) -> Result<bool> {
        for input in &self.inputs {
            if sha256_file(Path::new(&input.path))? != input.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
