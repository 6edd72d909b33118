//! Assessment metrics over session logs and plan comparison against gold plans.

mod corpus;
mod matching;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::planner::{Plan, TemplateLibrary};
use crate::session::{Session, Speaker, Versions};

pub use corpus::{
    generate_corpus, realize, run_corpus, shipped_fixture, Act, CaseReport, Corpus, CorpusCase, CorpusError,
    CorpusReport, CorpusRun, CorpusSchemaError, Fixtures, GoldNode, GoldPlan, RunOptions, Step, CORPUS_SCHEMA_VERSION,
    SHIPPED_CORPUS,
};
pub use matching::{brute_force_match, match_graphs, Matching};

/// Attempts (user turns) spent on each recognized intent, in order.
/// A run of unrecognized turns counts towards the next recognized one;
/// trailing unrecognized turns are dropped.
pub fn m1_attempts(session: &Session) -> Vec<u32> {
    let mut out = Vec::new();
    let mut attempts = 0;
    for t in session.turns.iter().filter(|t| t.speaker == Speaker::User && !t.upload) {
        attempts += 1;
        if t.intent.is_some() {
            out.push(attempts);
            attempts = 0;
        }
    }
    out
}

/// Mean of attempts per recognized intent over all sessions.
pub fn m1(sessions: &[Session]) -> Option<f64> {
    let all: Vec<u32> = sessions.iter().flat_map(m1_attempts).collect();
    mean(all.iter().map(|&a| f64::from(a)))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// A plan reduced to what is compared: op names with normalized params, and edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub op: String,
    pub params: BTreeMap<String, Value>,
}

impl GraphNode {
    /// Equality class key; map keys are already ordered.
    pub fn class_key(&self) -> String {
        format!(
            "{}{}",
            self.op,
            serde_json::to_string(&self.params).expect("params serialize")
        )
    }
}

impl PlanGraph {
    pub fn from_plan(plan: &Plan, library: &TemplateLibrary) -> Self {
        let index: BTreeMap<_, _> = plan.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        PlanGraph {
            nodes: plan
                .nodes
                .iter()
                .map(|n| GraphNode {
                    op: n.op_name.clone(),
                    params: library.normalized_params(&n.op_name, &n.params),
                })
                .collect(),
            edges: plan
                .edges
                .iter()
                .filter_map(|e| Some((*index.get(&e.from)?, *index.get(&e.to)?)))
                .collect(),
        }
    }
}

/// Raw counts behind the plan scores, summable across cases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCounts {
    pub generated_nodes: usize,
    pub gold_nodes: usize,
    pub matched_nodes: usize,
    pub generated_edges: usize,
    pub gold_edges: usize,
    pub matched_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanScores {
    pub node_precision: f64,
    pub node_recall: f64,
    pub edge_precision: f64,
    pub edge_recall: f64,
}

/// matched / total, where an empty total scores 1 only if the other side is empty too.
fn ratio(matched: usize, total: usize, other_total: usize) -> f64 {
    if total == 0 {
        if other_total == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        matched as f64 / total as f64
    }
}

impl PlanCounts {
    pub fn scores(&self) -> PlanScores {
        PlanScores {
            node_precision: ratio(self.matched_nodes, self.generated_nodes, self.gold_nodes),
            node_recall: ratio(self.matched_nodes, self.gold_nodes, self.generated_nodes),
            edge_precision: ratio(self.matched_edges, self.generated_edges, self.gold_edges),
            edge_recall: ratio(self.matched_edges, self.gold_edges, self.generated_edges),
        }
    }

    pub fn add(&mut self, other: &PlanCounts) {
        self.generated_nodes += other.generated_nodes;
        self.gold_nodes += other.gold_nodes;
        self.matched_nodes += other.matched_nodes;
        self.generated_edges += other.generated_edges;
        self.gold_edges += other.gold_edges;
        self.matched_edges += other.matched_edges;
    }
}

/// Compares a generated plan graph against a gold one.
pub fn m2(generated: &PlanGraph, gold: &PlanGraph) -> PlanCounts {
    let m = match_graphs(generated, gold);
    PlanCounts {
        generated_nodes: generated.nodes.len(),
        gold_nodes: gold.nodes.len(),
        matched_nodes: m.nodes,
        generated_edges: generated.edges.len(),
        gold_edges: gold.edges.len(),
        matched_edges: m.edges,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackScore {
    pub likes: usize,
    pub dislikes: usize,
    pub like_ratio: Option<f64>,
}

/// Share of likes among all feedback.
pub fn m3(sessions: &[Session]) -> FeedbackScore {
    let (likes, dislikes) = sessions
        .iter()
        .map(|s| s.feedback_counts())
        .fold((0, 0), |(l, d), (a, b)| (l + a, d + b));
    let total = likes + dislikes;
    FeedbackScore {
        likes,
        dislikes,
        like_ratio: (total > 0).then(|| likes as f64 / total as f64),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub stories: usize,
    pub terminated: usize,
    pub completion_rate: Option<f64>,
}

/// Terminated sessions that produced a story.
pub fn m4(sessions: &[Session]) -> Completion {
    let terminated: Vec<&Session> = sessions.iter().filter(|s| s.status.is_terminated()).collect();
    let stories = terminated.iter().filter(|s| s.story.is_some()).count();
    Completion {
        stories,
        terminated: terminated.len(),
        completion_rate: (!terminated.is_empty()).then(|| stories as f64 / terminated.len() as f64),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Satisfaction {
    pub csat_mean: Option<f64>,
    pub nps: Option<f64>,
    pub promoters: usize,
    pub passives: usize,
    pub detractors: usize,
}

/// CSAT from 1 to 5 ratings, NPS from 0 to 10 recommendation scores.
pub fn m5(satisfaction: &[u8], recommend: &[u8]) -> Satisfaction {
    let promoters = recommend.iter().filter(|&&r| r >= 9).count();
    let detractors = recommend.iter().filter(|&&r| r <= 6).count();
    let n = recommend.len();
    Satisfaction {
        csat_mean: mean(satisfaction.iter().map(|&r| f64::from(r))),
        nps: (n > 0).then(|| 100.0 * promoters as f64 / n as f64 - 100.0 * detractors as f64 / n as f64),
        promoters,
        passives: n - promoters - detractors,
        detractors,
    }
}

/// Survey answers collected from sessions.
pub fn m5_sessions(sessions: &[Session]) -> Satisfaction {
    let surveys: Vec<_> = sessions.iter().filter_map(|s| s.survey.as_ref()).collect();
    let sat: Vec<u8> = surveys.iter().filter_map(|s| s.satisfaction).collect();
    let rec: Vec<u8> = surveys.iter().filter_map(|s| s.recommend).collect();
    m5(&sat, &rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sessions: usize,
    pub m1_mean_interactions_to_intent: Option<f64>,
    pub m1_recognized_intents: usize,
    pub m2: Option<PlanScores>,
    pub m2_counts: Option<PlanCounts>,
    pub m3_like_ratio: Option<f64>,
    pub m3_likes: usize,
    pub m3_dislikes: usize,
    pub m4_completion_rate: Option<f64>,
    pub m4_stories: usize,
    pub m4_terminated: usize,
    pub m5: Satisfaction,
    pub vocabulary_version: String,
    pub template_version: String,
}

impl MetricsReport {
    /// Everything that can be computed from stored sessions alone.
    pub fn from_sessions(sessions: &[Session], versions: &Versions) -> Self {
        let f = m3(sessions);
        let c = m4(sessions);
        MetricsReport {
            sessions: sessions.len(),
            m1_mean_interactions_to_intent: m1(sessions),
            m1_recognized_intents: sessions.iter().map(|s| m1_attempts(s).len()).sum(),
            m2: None,
            m2_counts: None,
            m3_like_ratio: f.like_ratio,
            m3_likes: f.likes,
            m3_dislikes: f.dislikes,
            m4_completion_rate: c.completion_rate,
            m4_stories: c.stories,
            m4_terminated: c.terminated,
            m5: m5_sessions(sessions),
            vocabulary_version: versions.vocabulary.clone(),
            template_version: versions.templates.clone(),
        }
    }

    pub fn with_plan_counts(mut self, counts: PlanCounts) -> Self {
        self.m2 = Some(counts.scores());
        self.m2_counts = Some(counts);
        self
    }

    /// Aligned two-column table for terminals.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
        let mut rows: Vec<(String, String)> = vec![
            ("sessions".into(), self.sessions.to_string()),
            (
                "M1 interactions per intent".into(),
                format!(
                    "{} over {} intents",
                    opt(self.m1_mean_interactions_to_intent),
                    self.m1_recognized_intents
                ),
            ),
        ];
        match &self.m2 {
            Some(s) => {
                rows.push(("M2 node precision".into(), opt(Some(s.node_precision))));
                rows.push(("M2 node recall".into(), opt(Some(s.node_recall))));
                rows.push(("M2 edge precision".into(), opt(Some(s.edge_precision))));
                rows.push(("M2 edge recall".into(), opt(Some(s.edge_recall))));
            }
            None => rows.push(("M2 plan precision/recall".into(), "undefined (no gold plans)".into())),
        }
        rows.push((
            "M3 like ratio".into(),
            format!(
                "{} ({} likes, {} dislikes)",
                opt(self.m3_like_ratio),
                self.m3_likes,
                self.m3_dislikes
            ),
        ));
        rows.push((
            "M4 completion rate".into(),
            format!(
                "{} ({} of {})",
                opt(self.m4_completion_rate),
                self.m4_stories,
                self.m4_terminated
            ),
        ));
        rows.push(("M5 CSAT mean".into(), opt(self.m5.csat_mean)));
        rows.push((
            "M5 NPS".into(),
            format!(
                "{} ({} promoters, {} passives, {} detractors)",
                opt(self.m5.nps),
                self.m5.promoters,
                self.m5.passives,
                self.m5.detractors
            ),
        ));
        rows.push(("vocabulary".into(), self.vocabulary_version.clone()));
        rows.push(("templates".into(), self.template_version.clone()));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests;
