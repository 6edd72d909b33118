//! Session state, turns and versioned pause snapshots.

use std::collections::{BTreeMap, BTreeSet};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use uuid::Uuid;

use crate::executor::{UploadRef, Workspace};
use crate::intent::{ActionClass, PendingKind, Rating, SessionContext};
use crate::planner::{MetaPattern, NodeId, NodeKind, NodeState, Plan};

pub const SESSION_SCHEMA_VERSION: u32 = 1;
pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    pub pattern_tag: Option<MetaPattern>,
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub feedback: Option<Rating>,
    pub timestamp: DateTime<Utc>,
    /// Recognized action of a user utterance; `None` when not understood.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<ActionClass>,
    /// True for user turns that stand for a file upload.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub upload: bool,
    /// Plan node a bot turn reports on or asks for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionStatus {
    Active,
    Paused,
    /// Ended with a story.
    Completed,
    /// Ended without a story.
    Abandoned,
}

impl SessionStatus {
    pub fn is_terminated(self) -> bool {
        matches!(self, SessionStatus::Completed | SessionStatus::Abandoned)
    }
}

/// The question the bot is waiting on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub kind: PendingKind,
    /// Plan node the answer is bound to.
    pub node: Option<NodeId>,
    /// Bot turn that asked.
    pub turn: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<ActionClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionRecord {
    pub action: ActionClass,
    pub score: f64,
    pub turn: usize,
    /// `None` while unanswered.
    pub accepted: Option<bool>,
}

/// An upload held back until the user picks sheets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedUpload {
    pub upload: UploadRef,
    pub node: NodeId,
    pub sheet_names: Vec<String>,
}

/// End-of-session survey answers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Survey {
    /// 0 to 10, likelihood to recommend.
    pub recommend: Option<u8>,
    /// 1 to 5 satisfaction.
    pub satisfaction: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub vocabulary: String,
    pub templates: String,
    pub messages: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: Uuid,
    pub user_id: String,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
    pub turns: Vec<Turn>,
    pub plan: Option<Plan>,
    pub workspace: Workspace,
    pub pending: Option<Pending>,
    #[serde(default)]
    pub staged_upload: Option<StagedUpload>,
    #[serde(default)]
    pub suggestions: Vec<SuggestionRecord>,
    /// Artifact id of the story, once written.
    #[serde(default)]
    pub story: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub survey: Option<Survey>,
    pub versions: Versions,
}

impl Session {
    pub fn context(&self) -> SessionContext {
        let columns = self
            .workspace
            .active_table
            .as_deref()
            .and_then(|id| self.workspace.artifact(id))
            .and_then(|a| a.meta.get("columns"))
            .and_then(Value::as_array)
            .map(|cols| cols.iter().filter_map(|c| c.as_str().map(str::to_string)).collect())
            .unwrap_or_default();
        SessionContext {
            pending: self.pending.as_ref().map(|p| p.kind),
            dataset_loaded: self.workspace.dataset_loaded(),
            columns,
            sheet_names: self
                .staged_upload
                .as_ref()
                .map(|s| s.sheet_names.clone())
                .unwrap_or_default(),
        }
    }

    /// Names of operations that completed, each once.
    pub fn executed_ops(&self) -> BTreeSet<String> {
        self.plan
            .iter()
            .flat_map(|p| &p.nodes)
            .filter(|n| n.state == NodeState::Completed && !n.kind.is_interaction())
            .map(|n| n.op_name.clone())
            .collect()
    }

    pub fn has_completed(&self, op: &str) -> bool {
        self.plan
            .iter()
            .flat_map(|p| &p.nodes)
            .any(|n| n.op_name == op && n.state == NodeState::Completed && n.kind != NodeKind::BotRequest)
    }

    /// (likes, dislikes) over bot turns.
    pub fn feedback_counts(&self) -> (usize, usize) {
        self.turns.iter().fold((0, 0), |(l, d), t| match t.feedback {
            Some(Rating::Like) => (l + 1, d),
            Some(Rating::Dislike) => (l, d + 1),
            None => (l, d),
        })
    }
}

/// A paused session with its payloads inlined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub schema_version: u32,
    pub session_id: Uuid,
    pub paused_at: DateTime<Utc>,
    pub session: Session,
    /// sha256 -> base64 payload
    pub blobs: BTreeMap<String, String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("snapshot schema error: {message} (found version {found}, supported {supported})")]
    Schema {
        found: String,
        supported: u32,
        message: String,
    },
    #[error("snapshot payload {0}")]
    Blob(String),
}

impl SessionSnapshot {
    pub fn capture(session: &Session, paused_at: DateTime<Utc>) -> Self {
        SessionSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            session_id: session.id,
            paused_at,
            session: session.clone(),
            blobs: session
                .workspace
                .blobs
                .iter()
                .map(|(h, b)| (h.clone(), BASE64.encode(b)))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshots serialize")
    }

    /// Parses a snapshot, checking versions before the body.
    pub fn from_json(text: &str) -> Result<Self, SnapshotError> {
        let value: Value = serde_json::from_str(text).map_err(|e| SnapshotError::Schema {
            found: "unreadable".into(),
            supported: SNAPSHOT_SCHEMA_VERSION,
            message: e.to_string(),
        })?;
        check_version(&value, "schema_version", SNAPSHOT_SCHEMA_VERSION)?;
        if let Some(inner) = value.get("session") {
            check_version(inner, "schema_version", SESSION_SCHEMA_VERSION)?;
        }
        serde_json::from_value(value).map_err(|e| SnapshotError::Schema {
            found: SNAPSHOT_SCHEMA_VERSION.to_string(),
            supported: SNAPSHOT_SCHEMA_VERSION,
            message: e.to_string(),
        })
    }

    /// Rebuilds the session with its payloads.
    pub fn into_session(self) -> Result<Session, SnapshotError> {
        if self.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(SnapshotError::Schema {
                found: self.schema_version.to_string(),
                supported: SNAPSHOT_SCHEMA_VERSION,
                message: "unsupported snapshot version".into(),
            });
        }
        let mut session = self.session;
        for (hash, data) in self.blobs {
            let bytes = BASE64
                .decode(data.as_bytes())
                .map_err(|e| SnapshotError::Blob(format!("{hash}: {e}")))?;
            session
                .workspace
                .blobs
                .insert_verified(&hash, bytes)
                .map_err(SnapshotError::Blob)?;
        }
        for a in &session.workspace.artifacts {
            if !session.workspace.blobs.contains(&a.hash) {
                return Err(SnapshotError::Blob(format!("{} has no payload", a.id)));
            }
        }
        Ok(session)
    }
}

pub(crate) fn check_version(value: &Value, field: &str, supported: u32) -> Result<(), SnapshotError> {
    match value.get(field) {
        Some(Value::Number(n)) if n.as_u64() == Some(supported as u64) => Ok(()),
        Some(other) => Err(SnapshotError::Schema {
            found: other.to_string(),
            supported,
            message: format!("unsupported `{field}`"),
        }),
        None => Err(SnapshotError::Schema {
            found: "none".into(),
            supported,
            message: format!("missing `{field}`"),
        }),
    }
}
