//! Run manifest: config digest, per-stage records and a digest of every
//! file in the output directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{file_digest, write_json_pretty};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Complete,
    /// Some items failed; artifacts hold the rest.
    Partial,
    BudgetExhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CallStats {
    pub backend_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub budget_used: u64,
    pub budget_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    /// RFC 3339, UTC.
    pub timestamp: String,
    /// Input path (relative to the output directory when inside it) to digest.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calls: Option<CallStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub backend: String,
    pub stages: BTreeMap<String, StageRecord>,
    /// Every other file under the output directory, by relative path.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config_digest: &str, seed: u64, backend: &str) -> Self {
        RunManifest {
            schema_version: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config_digest.to_string(),
            seed,
            backend: backend.to_string(),
            stages: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    /// Loads the manifest in `out`, starting afresh when it is missing or
    /// was written under a different configuration.
    pub fn load_or_new(out: &Path, config_digest: &str, seed: u64, backend: &str) -> Self {
        let path = out.join(MANIFEST_FILE);
        let existing = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<RunManifest>(&b).ok());
        match existing {
            Some(m) if m.config_digest == config_digest => m,
            Some(_) => {
                log::warn!("configuration changed since {} was written; stage records reset", path.display());
                RunManifest::new(config_digest, seed, backend)
            }
            None => RunManifest::new(config_digest, seed, backend),
        }
    }

    /// Re-digests the output directory and writes the manifest atomically.
    pub fn save(&mut self, out: &Path) -> std::io::Result<()> {
        self.files = digest_tree(out)?;
        write_json_pretty(&out.join(MANIFEST_FILE), self)
    }
}

/// Relative path (with `/` separators) to sha256 for every regular file
/// below `root`, skipping the manifest and in-flight temp files.
pub fn digest_tree(root: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative(root, entry.path());
        let name = entry.file_name().to_string_lossy();
        if rel == MANIFEST_FILE || (name.starts_with('.') && name.ends_with(".tmp")) {
            continue;
        }
        files.insert(rel, file_digest(entry.path())?);
    }
    Ok(files)
}

pub fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

pub fn format_timestamp(epoch_secs: i64) -> String {
    chrono::DateTime::from_timestamp(epoch_secs, 0)
        .unwrap_or_default()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}
