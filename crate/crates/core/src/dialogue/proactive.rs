//! User profiles, cross-session history and the proactive suggestion ladder.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::intent::ActionClass;
use crate::session::{Session, SessionStatus};
use crate::storyteller::PlotKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    #[serde(default)]
    pub plot_kind_likes: BTreeMap<PlotKind, u32>,
    #[serde(default)]
    pub completed_sessions: u32,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>) -> Self {
        UserProfile {
            user_id: user_id.into(),
            ..UserProfile::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionOutcome {
    pub action: ActionClass,
    pub accepted: bool,
}

/// What a terminated session leaves behind for later sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub session_id: Uuid,
    pub user_id: String,
    pub completed_at: DateTime<Utc>,
    pub ops: BTreeSet<String>,
    pub suggestions: Vec<SuggestionOutcome>,
    pub story: bool,
}

impl HistoryEntry {
    /// `None` unless the session has terminated.
    pub fn from_session(session: &Session) -> Option<Self> {
        if !session.status.is_terminated() {
            return None;
        }
        Some(HistoryEntry {
            session_id: session.id,
            user_id: session.user_id.clone(),
            completed_at: session.turns.last().map(|t| t.timestamp).unwrap_or(session.created_at),
            ops: session.executed_ops(),
            suggestions: session
                .suggestions
                .iter()
                .filter_map(|s| {
                    s.accepted.map(|accepted| SuggestionOutcome {
                        action: s.action,
                        accepted,
                    })
                })
                .collect(),
            story: session.status == SessionStatus::Completed && session.story.is_some(),
        })
    }
}

/// Profiles and history shared by all sessions of an engine.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Knowledge {
    pub profiles: BTreeMap<String, UserProfile>,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub action: ActionClass,
    pub rationale: String,
    pub score: f64,
}

/// Jaccard similarity of two op-name sets; two empty sets are identical.
pub fn session_similarity(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// History entries scored against `ops`, most similar first, ties by recency.
pub fn rank_history(history: &[HistoryEntry], ops: &BTreeSet<String>) -> Vec<(Uuid, f64)> {
    let mut scored: Vec<(&HistoryEntry, f64)> = history.iter().map(|e| (e, session_similarity(ops, &e.ops))).collect();
    scored.sort_by(|(ea, sa), (eb, sb)| {
        sb.total_cmp(sa)
            .then_with(|| eb.completed_at.cmp(&ea.completed_at))
            .then_with(|| ea.session_id.cmp(&eb.session_id))
    });
    scored.into_iter().map(|(e, s)| (e.session_id, s)).collect()
}

/// (done op, suggested action, op the action completes), in ladder order.
const LADDER: [(&str, ActionClass, &str); 4] = [
    ("profile", ActionClass::Correlate, "correlation_matrix"),
    ("correlation_matrix", ActionClass::Cluster, "cluster"),
    ("cluster", ActionClass::PlotRequest, "plot_histograms"),
    ("plot_histograms", ActionClass::EndSession, ""),
];

/// Similarity-weighted share of past offers of `action` that were accepted.
pub fn acceptance_rate(history: &[HistoryEntry], ops: &BTreeSet<String>, action: ActionClass) -> Option<f64> {
    let mut weight = 0.0;
    let mut accepted = 0.0;
    for e in history {
        let sim = session_similarity(ops, &e.ops);
        for s in e.suggestions.iter().filter(|s| s.action == action) {
            weight += sim;
            if s.accepted {
                accepted += sim;
            }
        }
    }
    (weight > 0.0).then(|| accepted / weight)
}

/// The next step to offer, or `None` when the ladder has nothing left.
pub fn propose_proactive(session: &Session, history: &[HistoryEntry]) -> Option<Suggestion> {
    let ops = session.executed_ops();
    let offered: BTreeSet<ActionClass> = session.suggestions.iter().map(|s| s.action).collect();
    let mut best: Option<Suggestion> = None;
    for (trigger, action, target) in LADDER {
        let done = if action == ActionClass::EndSession {
            session.story.is_some()
        } else {
            ops.contains(target)
        };
        if !ops.contains(trigger) || done || offered.contains(&action) {
            continue;
        }
        let rate = acceptance_rate(history, &ops, action);
        let score = 0.5 + 0.5 * rate.unwrap_or(0.0);
        let rationale = match rate {
            Some(r) => format!(
                "`{trigger}` is done; similar sessions accepted this {:.0}% of the time",
                r * 100.0
            ),
            None => format!("`{trigger}` is done and no similar session offered this yet"),
        };
        // strict comparison keeps the earlier ladder step on ties
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(Suggestion {
                action,
                rationale,
                score,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(session_similarity(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(session_similarity(&set(&["a"]), &set(&["b"])), 0.0);
        let s = session_similarity(&set(&["profile", "correlate"]), &set(&["profile", "cluster"]));
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(session_similarity(&set(&[]), &set(&[])), 1.0);
    }

    fn entry(id: u128, ops: &[&str], secs: i64) -> HistoryEntry {
        HistoryEntry {
            session_id: Uuid::from_u128(id),
            user_id: "u".into(),
            completed_at: DateTime::from_timestamp(secs, 0).unwrap(),
            ops: set(ops),
            suggestions: Vec::new(),
            story: true,
        }
    }

    #[test]
    fn ranking_by_similarity_then_recency() {
        assert!(rank_history(&[], &set(&["a"])).is_empty());
        let h = vec![
            entry(1, &["x", "y", "z"], 10),
            entry(2, &["a", "y", "z"], 5),
            entry(3, &["a", "y", "z"], 20),
        ];
        let r = rank_history(&h, &set(&["a", "b", "c"]));
        // 1 of 5 shared beats 0, the newer of two equals comes first
        assert_eq!(r.iter().map(|(id, _)| id.as_u128()).collect::<Vec<_>>(), vec![3, 2, 1]);
        assert!((r[0].1 - 0.2).abs() < 1e-12);
        assert_eq!(r[2].1, 0.0);
    }

    #[test]
    fn acceptance_rate_is_similarity_weighted() {
        let mut a = entry(1, &["profile"], 1);
        a.suggestions.push(SuggestionOutcome {
            action: ActionClass::Correlate,
            accepted: true,
        });
        let mut b = entry(2, &["cluster"], 2);
        b.suggestions.push(SuggestionOutcome {
            action: ActionClass::Correlate,
            accepted: false,
        });
        let rate = acceptance_rate(&[a, b], &set(&["profile"]), ActionClass::Correlate).unwrap();
        assert_eq!(rate, 1.0);
        assert_eq!(acceptance_rate(&[], &set(&["profile"]), ActionClass::Correlate), None);
    }
}
