//! Artifacts, the content-addressed blob store and the per-session workspace.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::ExecutionLog;
use crate::planner::{DataKind, NodeId};
use crate::storyteller::PlotKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArtifactKind {
    TableRef,
    Profile,
    CorrelationMatrix,
    ClusterResult,
    PlotSvg,
    StoryDoc,
    PruningReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub id: String,
    pub kind: ArtifactKind,
    /// Plan node that produced it; `None` for session-level documents.
    pub node_id: Option<NodeId>,
    /// Data kind it feeds to downstream nodes, if any.
    pub provides: Option<DataKind>,
    /// sha256 of the payload bytes.
    pub hash: String,
    pub media_type: String,
    pub title: String,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_kind: Option<PlotKind>,
    /// Small JSON summary for clients that do not fetch the payload.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub meta: Value,
    /// False for intermediate results that are not shown as turns.
    pub visible: bool,
}

impl Artifact {
    pub fn file_name(&self) -> String {
        format!("{}.{}", self.hash, extension(&self.media_type))
    }
}

pub fn extension(media_type: &str) -> &'static str {
    match media_type {
        "image/svg+xml" => "svg",
        "text/csv" => "csv",
        "text/markdown" => "md",
        "application/json" => "json",
        _ => "bin",
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Payload bytes keyed by their sha256.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlobStore {
    blobs: BTreeMap<String, Vec<u8>>,
}

impl BlobStore {
    pub fn put(&mut self, bytes: Vec<u8>) -> String {
        let hash = sha256_hex(&bytes);
        self.blobs.entry(hash.clone()).or_insert(bytes);
        hash
    }

    pub fn get(&self, hash: &str) -> Option<&[u8]> {
        self.blobs.get(hash).map(Vec::as_slice)
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.blobs.contains_key(hash)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<u8>)> {
        self.blobs.iter()
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    /// Inserts bytes under a claimed hash, rejecting mismatches.
    pub fn insert_verified(&mut self, hash: &str, bytes: Vec<u8>) -> Result<(), String> {
        let actual = sha256_hex(&bytes);
        if actual != hash {
            return Err(format!("blob {hash} has content hash {actual}"));
        }
        self.blobs.insert(actual, bytes);
        Ok(())
    }
}

/// A received file kept for (re)transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadRef {
    pub hash: String,
    pub filename: String,
    pub size: usize,
}

/// Execution state a session owns besides its plan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    /// Seed for every randomized operation in the session.
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
    pub log: ExecutionLog,
    /// Artifact id of the table analyses read by default.
    pub active_table: Option<String>,
    pub active_upload: Option<UploadRef>,
    #[serde(skip)]
    pub blobs: BlobStore,
}

impl Workspace {
    pub fn new(seed: u64) -> Self {
        Workspace {
            seed,
            ..Workspace::default()
        }
    }

    pub fn artifact(&self, id: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.id == id)
    }

    pub fn payload(&self, id: &str) -> Option<&[u8]> {
        self.artifact(id).and_then(|a| self.blobs.get(&a.hash))
    }

    pub fn dataset_loaded(&self) -> bool {
        self.active_table.is_some()
    }

    pub(crate) fn next_artifact_id(&self) -> String {
        format!("art-{:04}", self.artifacts.len() + 1)
    }
}

/// Time source, replaceable for reproducible logs.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances one second per reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
}

impl SteppingClock {
    pub fn new(start_epoch_seconds: i64) -> Self {
        SteppingClock {
            next: AtomicI64::new(start_epoch_seconds),
        }
    }
}

impl Default for SteppingClock {
    fn default() -> Self {
        SteppingClock::new(1_700_000_000)
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let s = self.next.fetch_add(1, Ordering::SeqCst);
        Utc.timestamp_opt(s, 0).single().expect("valid timestamp")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_content_addressed() {
        let mut b = BlobStore::default();
        let h1 = b.put(b"abc".to_vec());
        let h2 = b.put(b"abc".to_vec());
        assert_eq!(h1, h2);
        assert_eq!(h1, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(b.len(), 1);
        assert!(b.insert_verified("00", b"x".to_vec()).is_err());
    }

    #[test]
    fn stepping_clock_advances() {
        let c = SteppingClock::new(0);
        assert!(c.now() < c.now());
    }
}
