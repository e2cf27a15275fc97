use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name relative to the output directory.
    pub file: String,
    pub sha256: String,
}

/// Record of one command run: what was asked, with which seed, and what came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    /// Digests only; two runs with the same config must agree on these.
    pub fn digests(&self) -> Vec<(&str, &str)> {
        self.outputs
            .iter()
            .map(|d| (d.file.as_str(), d.sha256.as_str()))
            .collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Collects outputs written under one directory and finally writes the manifest.
pub(crate) struct RunRecorder {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
    outputs: Vec<FileDigest>,
}

impl RunRecorder {
    pub(crate) fn start(dir: &Path, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(RunRecorder {
            dir: dir.to_path_buf(),
            command,
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub(crate) fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub(crate) fn record(&mut self, file: &str) -> Result<()> {
        let sha256 = file_digest(&self.path(file))?;
        self.outputs.push(FileDigest {
            file: file.to_string(),
            sha256,
        });
        Ok(())
    }

    pub(crate) fn finish(self, seed: Option<u64>, config: &impl Serialize) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
