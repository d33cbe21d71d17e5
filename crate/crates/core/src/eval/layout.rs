use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EvalError;

/// `<root>/<task>/<strategy>`.
pub fn run_dir(root: &Path, task: &str, strategy: &str) -> PathBuf {
    root.join(task).join(strategy)
}

pub fn file_sha256(path: &Path) -> Result<String, EvalError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Everything needed to rerun a command: its configuration, seeds and the
/// hashes of the checkpoints it read and the files it wrote.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub checkpoints: BTreeMap<String, String>,
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest { command: command.into(), config, ..Default::default() }
    }

    /// Records the hash of every regular file directly inside `dir` other
    /// than the manifest itself, named `skip`.
    pub fn hash_outputs(&mut self, dir: &Path, skip: &str) -> Result<(), EvalError> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != skip))
            .collect();
        entries.sort();
        for p in entries {
            let name = p.file_name().expect("file").to_string_lossy().into_owned();
            self.files.insert(name, file_sha256(&p)?);
        }
        Ok(())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `manifest` as `dir/name`.
pub fn write_manifest(dir: &Path, name: &str, manifest: &RunManifest) -> Result<PathBuf, EvalError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
