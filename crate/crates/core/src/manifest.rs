//! Run manifests: what was run, on which inputs, with which seed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    /// Input label (usually the path) to SHA-256 digest.
    pub input_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

impl Manifest {
    pub fn new(command: impl Into<String>, args: Vec<String>, seed: Option<u64>) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            args,
            input_digests: BTreeMap::new(),
            seed,
            timestamp,
        }
    }

    /// Records the digest of the file at `path` under its display name.
    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        let d = file_digest(path)?;
        self.input_digests.insert(path.display().to_string(), d);
        Ok(())
    }

    pub fn add_bytes(&mut self, label: impl Into<String>, bytes: &[u8]) {
        self.input_digests.insert(label.into(), sha256_hex(bytes));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
