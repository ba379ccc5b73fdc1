use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// `complete` or `incomplete`.
    pub status: String,
    pub failed_phase: Option<String>,
    pub error: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Resolved scenario in config grammar.
    pub config: String,
    pub timings: Vec<PhaseTiming>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: hash mismatch (manifest {expected}, file {actual})")]
    HashMismatch {
        path: String,
        expected: String,
        actual: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash a file under `dir` for the manifest.
pub fn file_entry(dir: &Path, name: &str) -> Result<FileEntry, ManifestError> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    Ok(FileEntry {
        path: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

impl RunManifest {
    /// Write `manifest.json` through a temporary file and a rename.
    pub fn write_atomic(&self, dir: &Path) -> Result<(), ManifestError> {
        let json = serde_json::to_string_pretty(self)?;
        let tmp = dir.join(format!(".{MANIFEST_NAME}.tmp"));
        {
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(json.as_bytes()).map_err(io_err(&tmp))?;
            f.write_all(b"\n").map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        let target = dir.join(MANIFEST_NAME);
        fs::rename(&tmp, &target).map_err(io_err(&target))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, ManifestError> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Re-hash every listed file and compare with the manifest.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest, ManifestError> {
    let m = RunManifest::read(dir)?;
    for f in &m.files {
        let actual = file_entry(dir, &f.path)?;
        if actual.sha256 != f.sha256 {
            return Err(ManifestError::HashMismatch {
                path: f.path.clone(),
                expected: f.sha256.clone(),
                actual: actual.sha256,
            });
        }
    }
    Ok(m)
}
