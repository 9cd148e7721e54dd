//! Run manifests written next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub provider_mode: String,
    /// Fully resolved settings for the run, seeds included.
    pub config: serde_json::Value,
    /// Resource name → sha256 of the content actually used.
    pub resources: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Digest over every file under the fixture directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixtures_hash: Option<String>,
    /// Digest of the cache directory as it was when the run started.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Run(format!("read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, PathBuf)>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, root, out)?;
        } else {
            let rel = path.strip_prefix(root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
            out.push((rel, path));
        }
    }
    Ok(())
}

/// Order-independent digest of a directory tree: sha256 over sorted
/// `relative path, file hash` lines. A missing directory hashes as empty.
pub fn dir_hash(dir: &Path) -> Result<String, CliError> {
    let mut files = Vec::new();
    if dir.is_dir() {
        walk(dir, dir, &mut files).map_err(|e| CliError::Run(format!("scan {}: {e}", dir.display())))?;
    }
    files.sort();
    let mut h = Sha256::new();
    for (rel, path) in files {
        h.update(rel.as_bytes());
        h.update(b"\t");
        h.update(file_hash(&path)?.as_bytes());
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}

pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary_output.with_file_name(name)
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, body + "\n").map_err(|e| CliError::Run(format!("write {}: {e}", path.display())))
    }
}
