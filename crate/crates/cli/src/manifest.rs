use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// An input or output file pinned by content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRef {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        let path = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        FileRef {
            path,
            sha256: sha256_hex(bytes),
        }
    }
}

/// Fully resolved `simulate` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub modulation: String,
    /// Sweep exactly as given, `START:STOP:STEP`.
    pub ebn0: String,
    pub max_frames: u64,
    pub min_errors: u64,
    pub max_iters: usize,
    pub workers: usize,
    pub seed: u64,
}

/// Written next to every results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: SimulateConfig,
    pub code: FileRef,
    pub interleaver: FileRef,
    pub results: FileRef,
    pub code_rate: f64,
    /// Es/N0 in dB at each sweep point.
    pub esn0_db: Vec<f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `results.csv` -> `results.csv.manifest.json`.
pub fn manifest_path(results: &Path) -> PathBuf {
    let mut name = results.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
