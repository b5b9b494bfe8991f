use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pipeline::Check;
use crate::HarnessError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub pipeline: String,
    pub config_hash: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub versions: Versions,
    pub files: Vec<FileEntry>,
    pub metrics: serde_json::Value,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub harness: String,
    pub core: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            harness: env!("CARGO_PKG_VERSION").to_string(),
            core: wavechain_core::VERSION.to_string(),
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path.display(), e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Every regular file under `dir` except manifests, sorted by relative path.
pub fn collect_files(dir: &Path) -> Result<Vec<FileEntry>, HarnessError> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path.file_name().is_some_and(|n| n != MANIFEST_NAME) {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut rel = Vec::new();
    walk(dir, dir, &mut rel).map_err(|e| HarnessError::io(dir.display(), e))?;
    let mut names: Vec<String> = rel
        .iter()
        .map(|p| p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let (sha256, bytes) = sha256_file(&dir.join(&name))?;
            Ok(FileEntry {
                path: name,
                sha256,
                bytes,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| HarnessError::io(path.display(), e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::io(path.display(), e))
    }
}

/// Recomputes the checksum of every listed file; returns the mismatches.
/// Files present on disk but missing from the manifest count as mismatches.
pub fn verify(dir: &Path) -> Result<Vec<String>, HarnessError> {
    let manifest = RunManifest::read(dir)?;
    let mut problems = Vec::new();
    for entry in &manifest.files {
        match sha256_file(&dir.join(&entry.path)) {
            Ok((sum, _)) if sum == entry.sha256 => {}
            Ok(_) => problems.push(format!("{}: checksum differs", entry.path)),
            Err(_) => problems.push(format!("{}: missing", entry.path)),
        }
    }
    for found in collect_files(dir)? {
        if !manifest.files.iter().any(|e| e.path == found.path) {
            problems.push(format!("{}: not listed", found.path));
        }
    }
    Ok(problems)
}
