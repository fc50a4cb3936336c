//! Append-only run manifest (`manifest.jsonl`).

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::store::read_jsonl;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryStatus {
    Ok,
    UpToDate,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub tool_version: String,
    pub rng_seed: u64,
    pub protocol_hash: String,
    /// Input name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Workdir-relative output path to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    path: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn open(workdir: &Path) -> io::Result<Self> {
        let path = workdir.join(MANIFEST_FILE);
        let entries = if path.is_file() { read_jsonl(&path)? } else { Vec::new() };
        Ok(Self { path, entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// The most recent entry of `stage` that produced or confirmed outputs.
    pub fn latest_success(&self, stage: &str) -> Option<&ManifestEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.stage == stage && e.status != EntryStatus::Failed)
    }

    pub fn append(&mut self, entry: ManifestEntry) -> io::Result<()> {
        let mut line = serde_json::to_string(&entry).map_err(io::Error::other)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        f.sync_all()?;
        self.entries.push(entry);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(stage: &str, status: EntryStatus) -> ManifestEntry {
        ManifestEntry {
            stage: stage.into(),
            started_at: DateTime::UNIX_EPOCH,
            finished_at: DateTime::UNIX_EPOCH,
            tool_version: "0".into(),
            rng_seed: 1,
            protocol_hash: "h".into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            status,
            notes: vec![],
        }
    }

    #[test]
    fn appends_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::open(dir.path()).unwrap();
        m.append(entry("search", EntryStatus::Ok)).unwrap();
        m.append(entry("search", EntryStatus::Failed)).unwrap();
        let first = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        m.append(entry("fetch", EntryStatus::UpToDate)).unwrap();
        let again = RunManifest::open(dir.path()).unwrap();
        assert_eq!(again.entries().len(), 3);
        assert_eq!(again.latest_success("search").unwrap().status, EntryStatus::Ok);
        assert!(again.latest_success("mine").is_none());
        let now = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(now.starts_with(&first));
    }
}
