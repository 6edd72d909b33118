//! File-based persistence for sessions, snapshots, artifacts, profiles and
//! the cross-session history index.
//!
//! ```text
//! <root>/
//!   profiles.json
//!   history.json
//!   history.lock
//!   sessions/<uuid>/session.json
//!   sessions/<uuid>/snapshot.json
//!   sessions/<uuid>/story.md
//!   sessions/<uuid>/artifacts/<sha256>.<ext>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::dialogue::{rank_history, HistoryEntry, Knowledge, UserProfile};
use crate::executor::{extension, sha256_hex};
use crate::session::{Session, SessionSnapshot, SnapshotError, SESSION_SCHEMA_VERSION};

pub const STORE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(Uuid),
    #[error("{path}: corrupt at `{field}`: {message}")]
    Corrupt {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfilesFile {
    schema_version: u32,
    profiles: BTreeMap<String, UserProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HistoryFile {
    schema_version: u32,
    entries: Vec<HistoryEntry>,
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, StoreError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn check_schema(path: &Path, text: &str, supported: u32) -> Result<(), StoreError> {
    let value: serde_json::Value = parse_json(path, text)?;
    crate::session::check_version(&value, "schema_version", supported).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        field: "schema_version".into(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(value).expect("store documents serialize")
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    /// Opens a store, creating the directory when missing.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: Uuid) -> PathBuf {
        self.root.join("sessions").join(id.to_string())
    }

    pub fn artifact_dir(&self, id: Uuid) -> PathBuf {
        self.session_dir(id).join("artifacts")
    }

    pub fn exists(&self, id: Uuid) -> bool {
        self.session_dir(id).join("session.json").is_file()
    }

    /// Payloads first, then session.json, so a loadable session always has its files.
    pub fn save_session(&self, session: &Session) -> Result<(), StoreError> {
        let dir = self.artifact_dir(session.id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let names: BTreeMap<&str, String> = session
            .workspace
            .artifacts
            .iter()
            .map(|a| (a.hash.as_str(), a.file_name()))
            .collect();
        for (hash, bytes) in session.workspace.blobs.iter() {
            let name = names
                .get(hash.as_str())
                .cloned()
                .unwrap_or_else(|| format!("{hash}.bin"));
            let path = dir.join(name);
            if !path.exists() {
                write_atomic(&path, bytes)?;
            }
        }
        if let Some(story) = session.story.as_deref().and_then(|id| session.workspace.payload(id)) {
            write_atomic(&self.session_dir(session.id).join("story.md"), story)?;
        }
        write_atomic(&self.session_dir(session.id).join("session.json"), &to_json(session))
    }

    pub fn load_session(&self, id: Uuid) -> Result<Session, StoreError> {
        let path = self.session_dir(id).join("session.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id)),
            Err(e) => return Err(io_err(&path)(e)),
        };
        check_schema(&path, &text, SESSION_SCHEMA_VERSION)?;
        let mut session: Session = parse_json(&path, &text)?;
        let dir = self.artifact_dir(id);
        if dir.is_dir() {
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let entry = entry.map_err(io_err(&dir))?;
                let file = entry.path();
                let Some(hash) = file.file_stem().and_then(|s| s.to_str()) else {
                    continue;
                };
                if hash.len() != 64 {
                    continue;
                }
                let bytes = fs::read(&file).map_err(io_err(&file))?;
                session
                    .workspace
                    .blobs
                    .insert_verified(hash, bytes)
                    .map_err(|message| StoreError::Corrupt {
                        path: file.clone(),
                        field: "(payload)".into(),
                        message,
                    })?;
            }
        }
        for (i, a) in session.workspace.artifacts.iter().enumerate() {
            if !session.workspace.blobs.contains(&a.hash) {
                return Err(StoreError::Corrupt {
                    path: dir.join(a.file_name()),
                    field: format!("workspace.artifacts[{i}]"),
                    message: format!("payload of {} is missing", a.id),
                });
            }
        }
        Ok(session)
    }

    /// Session ids with a session.json, sorted.
    pub fn list_sessions(&self) -> Result<Vec<Uuid>, StoreError> {
        let dir = self.root.join("sessions");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            if let Some(id) = entry.file_name().to_str().and_then(|n| Uuid::parse_str(n).ok()) {
                if self.exists(id) {
                    ids.push(id);
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn save_snapshot(&self, snapshot: &SessionSnapshot) -> Result<PathBuf, StoreError> {
        let path = self.session_dir(snapshot.session_id).join("snapshot.json");
        write_atomic(&path, snapshot.to_json().as_bytes())?;
        Ok(path)
    }

    pub fn load_snapshot(&self, id: Uuid) -> Result<SessionSnapshot, StoreError> {
        let path = self.session_dir(id).join("snapshot.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id)),
            Err(e) => return Err(io_err(&path)(e)),
        };
        SessionSnapshot::from_json(&text).map_err(|e| StoreError::Corrupt {
            path,
            field: match &e {
                SnapshotError::Schema { .. } => "schema_version".into(),
                SnapshotError::Blob(_) => "blobs".into(),
            },
            message: e.to_string(),
        })
    }

    /// Path of an artifact file of a stored session, if the artifact exists.
    pub fn artifact_path(&self, session: &Session, artifact_id: &str) -> Option<PathBuf> {
        session
            .workspace
            .artifact(artifact_id)
            .map(|a| self.artifact_dir(session.id).join(a.file_name()))
    }

    fn read_optional<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, StoreError> {
        let path = self.root.join(name);
        match fs::read_to_string(&path) {
            Ok(text) => {
                check_schema(&path, &text, STORE_SCHEMA_VERSION)?;
                parse_json(&path, &text).map(Some)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn load_profiles(&self) -> Result<BTreeMap<String, UserProfile>, StoreError> {
        Ok(self
            .read_optional::<ProfilesFile>("profiles.json")?
            .map(|f| f.profiles)
            .unwrap_or_default())
    }

    pub fn save_profiles(&self, profiles: &BTreeMap<String, UserProfile>) -> Result<(), StoreError> {
        let file = ProfilesFile {
            schema_version: STORE_SCHEMA_VERSION,
            profiles: profiles.clone(),
        };
        write_atomic(&self.root.join("profiles.json"), &to_json(&file))
    }

    pub fn load_history(&self) -> Result<Vec<HistoryEntry>, StoreError> {
        Ok(self
            .read_optional::<HistoryFile>("history.json")?
            .map(|f| f.entries)
            .unwrap_or_default())
    }

    fn lock_history(&self) -> Result<File, StoreError> {
        let path = self.root.join("history.lock");
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err(&path))?;
        file.lock().map_err(io_err(&path))?;
        Ok(file)
    }

    fn write_history(&self, mut entries: Vec<HistoryEntry>) -> Result<(), StoreError> {
        entries.sort_by(|a, b| {
            a.completed_at
                .cmp(&b.completed_at)
                .then(a.session_id.cmp(&b.session_id))
        });
        let file = HistoryFile {
            schema_version: STORE_SCHEMA_VERSION,
            entries,
        };
        write_atomic(&self.root.join("history.json"), &to_json(&file))
    }

    /// Adds or replaces one entry under the history lock.
    pub fn record_history(&self, entry: HistoryEntry) -> Result<(), StoreError> {
        let _lock = self.lock_history()?;
        let mut entries = self.load_history()?;
        entries.retain(|e| e.session_id != entry.session_id);
        entries.push(entry);
        self.write_history(entries)
    }

    pub fn load_knowledge(&self) -> Result<Knowledge, StoreError> {
        Ok(Knowledge {
            profiles: self.load_profiles()?,
            history: self.load_history()?,
        })
    }

    /// Persists profiles and merges history entries into the index.
    pub fn save_knowledge(&self, knowledge: &Knowledge) -> Result<(), StoreError> {
        self.save_profiles(&knowledge.profiles)?;
        let _lock = self.lock_history()?;
        let mut entries = self.load_history()?;
        for e in &knowledge.history {
            entries.retain(|x| x.session_id != e.session_id);
            entries.push(e.clone());
        }
        self.write_history(entries)
    }

    /// Terminated sessions scored against `ops`, most similar first.
    pub fn query_history(&self, ops: &BTreeSet<String>) -> Result<Vec<(Uuid, f64)>, StoreError> {
        Ok(rank_history(&self.load_history()?, ops))
    }

    /// Recomputes the history index from the session files and writes it.
    pub fn rebuild_history(&self) -> Result<Vec<HistoryEntry>, StoreError> {
        let _lock = self.lock_history()?;
        let mut entries = Vec::new();
        for id in self.list_sessions()? {
            if let Some(e) = HistoryEntry::from_session(&self.load_session(id)?) {
                entries.push(e);
            }
        }
        self.write_history(entries)?;
        self.load_history()
    }

    /// Every stored session, for metrics recomputation.
    pub fn load_all(&self) -> Result<Vec<Session>, StoreError> {
        self.list_sessions()?
            .into_iter()
            .map(|id| self.load_session(id))
            .collect()
    }
}

/// File name a payload is stored under when no artifact describes it.
pub fn blob_file_name(bytes: &[u8], media_type: Option<&str>) -> String {
    format!("{}.{}", sha256_hex(bytes), media_type.map(extension).unwrap_or("bin"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dialogue::Engine;
    use crate::executor::SteppingClock;

    const CSV: &str = "name,a,b\nx,1,2\ny,2,4.5\nz,3,5\nw,4,9\n";

    fn engine() -> Engine {
        Engine::with_clock(Arc::new(SteppingClock::default()))
    }

    fn finished(e: &Engine, id: u128, extra: &str) -> Session {
        let mut s = e.new_session_with_id(Uuid::from_u128(id), "u", 1);
        e.upload(&mut s, CSV.as_bytes(), "t.csv", None).unwrap();
        e.handle_turn(&mut s, "statistical").unwrap();
        if !extra.is_empty() {
            e.handle_turn(&mut s, extra).unwrap();
        }
        e.handle_turn(&mut s, "end").unwrap();
        s
    }

    #[test]
    fn round_trip_mid_preparation() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let e = engine();
        let mut s = e.new_session("u", 1);
        e.handle_turn(&mut s, "Help me to analyse my data").unwrap();
        e.upload(&mut s, CSV.as_bytes(), "t.csv", None).unwrap();
        store.save_session(&s).unwrap();
        let loaded = store.load_session(s.id).unwrap();
        assert_eq!(loaded, s);
        assert_eq!(loaded.workspace.blobs, s.workspace.blobs);
    }

    #[test]
    fn unknown_and_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = Uuid::from_u128(9);
        assert!(matches!(store.load_session(id), Err(StoreError::NotFound(_))));
        let e = engine();
        let s = e.new_session_with_id(id, "u", 1);
        store.save_session(&s).unwrap();
        let path = store.session_dir(id).join("session.json");
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(store.load_session(id), Err(StoreError::Corrupt { .. })));
        fs::write(&path, text.replace("\"Active\"", "\"Sleeping\"")).unwrap();
        match store.load_session(id) {
            Err(StoreError::Corrupt { field, .. }) => assert_eq!(field, "status"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failed_write_keeps_the_previous_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_atomic(&path, b"old").unwrap();
        // a temp file that is never persisted stands for a crash before rename
        let mut tmp = tempfile::NamedTempFile::new_in(dir.path()).unwrap();
        tmp.write_all(b"half").unwrap();
        drop(tmp);
        assert_eq!(fs::read(&path).unwrap(), b"old");
        write_atomic(&path, b"new").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"new");
    }

    #[test]
    fn history_queries_and_rebuild() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(store.query_history(&BTreeSet::new()).unwrap().is_empty());
        let e = engine();
        let a = finished(&e, 1, "");
        let b = finished(&e, 2, "analyse the correlation");
        for s in [&a, &b] {
            store.save_session(s).unwrap();
        }
        store.save_knowledge(&e.knowledge()).unwrap();
        let ops = a.executed_ops();
        let ranked = store.query_history(&ops).unwrap();
        assert_eq!(ranked[0], (a.id, 1.0));
        assert!(ranked[1].1 < 1.0);
        let index = fs::read(dir.path().join("history.json")).unwrap();
        store.rebuild_history().unwrap();
        assert_eq!(fs::read(dir.path().join("history.json")).unwrap(), index);
        assert_eq!(store.load_profiles().unwrap()["u"].completed_sessions, 2);
        assert!(dir
            .path()
            .join("sessions")
            .join(a.id.to_string())
            .join("story.md")
            .is_file());
    }

    #[test]
    fn snapshots_are_stored() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let e = engine();
        let mut s = e.new_session("u", 1);
        e.upload(&mut s, CSV.as_bytes(), "t.csv", None).unwrap();
        let snap = e.pause(&mut s).unwrap();
        store.save_snapshot(&snap).unwrap();
        let back = store.load_snapshot(s.id).unwrap().into_session().unwrap();
        assert_eq!(back.workspace.blobs, s.workspace.blobs);
        let path = store.session_dir(s.id).join("snapshot.json");
        let text = fs::read_to_string(&path)
            .unwrap()
            .replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(store.load_snapshot(s.id), Err(StoreError::Corrupt { .. })));
    }
}
