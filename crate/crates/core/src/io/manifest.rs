use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Dataset;

/// SHA-256 over a canonical byte encoding of the dataset.
pub fn dataset_hash(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(b"shgcn-dataset-v1");
    for v in [dataset.num_users, dataset.num_items, dataset.interactions.len(), dataset.triplets.len()] {
        h.update((v as u64).to_le_bytes());
    }
    for &(u, i) in &dataset.interactions {
        h.update((u as u64).to_le_bytes());
        h.update((i as u64).to_le_bytes());
    }
    for &(a, b, i) in &dataset.triplets {
        h.update((a as u64).to_le_bytes());
        h.update((b as u64).to_le_bytes());
        h.update((i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// SHA-256 of a value's compact JSON encoding.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub model: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub dataset_hash: String,
    /// Input locations; free-form so synthetic and file-backed runs share one shape.
    pub dataset: serde_json::Value,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
    pub outputs: BTreeMap<String, String>,
}

pub fn append_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(manifest)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    Ok(())
}

pub fn read_manifests(path: &Path) -> Result<Vec<RunManifest>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
