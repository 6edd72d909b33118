//! Synthetic conversation corpus: generation from the pattern grammar,
//! seeded realization, and headless runs against the engine.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use super::{m1_attempts, m2, GraphNode, MetricsReport, PlanCounts, PlanGraph, PlanScores};
use crate::dialogue::Engine;
use crate::executor::SteppingClock;
use crate::intent::{ActionClass, Rating, Vocabulary, WordClass};
use crate::planner::{session_ref, Edge, MetaPattern, NodeState, Plan, PlanNode, TemplateLibrary};
use crate::session::{Session, Speaker, Survey};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;
pub const SHIPPED_CORPUS: &str = include_str!("../../data/conversation_corpus.json");

const FIXTURES: [(&str, &[u8]); 3] = [
    ("countries.csv", include_bytes!("../../data/fixtures/countries.csv")),
    ("sensors.csv", include_bytes!("../../data/fixtures/sensors.csv")),
    ("shops.csv", include_bytes!("../../data/fixtures/shops.csv")),
];

/// A shipped fixture dataset by file name.
pub fn shipped_fixture(name: &str) -> Option<&'static [u8]> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, b)| *b)
}

/// What the simulated user means by an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "snake_case")]
pub enum Act {
    Noise,
    Handshake,
    Describe { structural: bool },
    Request { action: ActionClass },
    Accept,
    Reject,
    Rate { rating: Rating },
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Say {
        #[serde(flatten)]
        act: Act,
        text: String,
        intent: ActionClass,
    },
    Upload {
        fixture: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldNode {
    pub key: String,
    pub op: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldPlan {
    pub nodes: Vec<GoldNode>,
    pub edges: Vec<(String, String)>,
}

impl GoldPlan {
    fn index(&self) -> BTreeMap<&str, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.key.as_str(), i))
            .collect()
    }

    pub fn to_graph(&self, library: &TemplateLibrary) -> PlanGraph {
        let index = self.index();
        PlanGraph {
            nodes: self
                .nodes
                .iter()
                .map(|n| GraphNode {
                    op: n.op.clone(),
                    params: library.normalized_params(&n.op, &n.params),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .filter_map(|(a, b)| Some((*index.get(a.as_str())?, *index.get(b.as_str())?)))
                .collect(),
        }
    }

    /// The gold plan as an executable-shape plan, for validation.
    pub fn to_plan(&self, library: &TemplateLibrary) -> Result<Plan, String> {
        let index = self.index();
        if index.len() != self.nodes.len() {
            return Err("duplicate node key".into());
        }
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let sig = library
                .signature(&n.op)
                .ok_or_else(|| format!("unknown op `{}`", n.op))?;
            nodes.push(PlanNode {
                id: i as u32,
                kind: sig.kind,
                op_name: n.op.clone(),
                params: n.params.clone(),
                bound: BTreeMap::new(),
                state: NodeState::Pending,
                outputs: Vec::new(),
                error: None,
                optional: false,
                pattern: MetaPattern::P2AnalyticsTask,
                template: String::new(),
                instance: 0,
                resolved: None,
            });
        }
        let mut edges = Vec::new();
        for (a, b) in &self.edges {
            let (Some(&f), Some(&t)) = (index.get(a.as_str()), index.get(b.as_str())) else {
                return Err(format!("edge {a} -> {b} names an unknown node"));
            };
            edges.push(Edge {
                from: f as u32,
                to: t as u32,
            });
        }
        Ok(Plan {
            nodes,
            edges,
            origin_pattern: MetaPattern::P1DataPreparation,
            template_name: "gold".into(),
            template_version: library.version().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusCase {
    pub id: String,
    pub seed: u64,
    pub steps: Vec<Step>,
    pub gold_plan: GoldPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<Survey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub schema_version: u32,
    pub corpus_id: String,
    /// Seed the cases were generated from.
    pub seed: u64,
    pub cases: Vec<CorpusCase>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusSchemaError {
    #[error("corpus JSON is malformed at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error("corpus schema_version {found} is not supported (expected {CORPUS_SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("the corpus has no cases")]
    Empty,
    #[error("case `{case}`: {message}")]
    Case { case: String, message: String },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Schema(#[from] CorpusSchemaError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Corpus {
    pub fn shipped() -> Self {
        Corpus::from_json(SHIPPED_CORPUS).expect("shipped corpus is valid")
    }

    /// Parses without checking cases against a template library.
    pub fn from_json(text: &str) -> Result<Self, CorpusSchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let corpus: Corpus = serde_path_to_error::deserialize(de).map_err(|e| CorpusSchemaError::Json {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if corpus.schema_version != CORPUS_SCHEMA_VERSION {
            return Err(CorpusSchemaError::Version {
                found: corpus.schema_version,
            });
        }
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Corpus::from_json(&text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("corpus serializes");
        s.push('\n');
        s
    }

    /// Non-empty, unique ids, every case has steps and a gold plan that validates.
    pub fn validate(&self, library: &TemplateLibrary) -> Result<(), CorpusSchemaError> {
        if self.cases.is_empty() {
            return Err(CorpusSchemaError::Empty);
        }
        let mut ids = BTreeSet::new();
        for case in &self.cases {
            let fail = |message: String| CorpusSchemaError::Case {
                case: case.id.clone(),
                message,
            };
            if !ids.insert(case.id.as_str()) {
                return Err(fail("duplicate case id".into()));
            }
            if case.steps.is_empty() {
                return Err(fail("no steps".into()));
            }
            let plan = case.gold_plan.to_plan(library).map_err(&fail)?;
            let violations = library.validate(&plan);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(fail(format!("gold plan is invalid: {}", list.join("; "))));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- realization

/// Sentence frames per act. `{v:lemma}`, `{n:lemma}` and `{m:lemma}` draw the
/// lemma or one of its synonyms from the vocabulary; `{a|b}` picks a literal.
fn frames(act: Act) -> &'static [&'static str] {
    match act {
        Act::Noise => &[
            "hmm",
            "uh",
            "blue elephants dance",
            "qwerty",
            "what a morning",
            "hmm, one moment",
        ],
        Act::Handshake => &[
            "{v:help} me to {v:analyse} my {n:data}",
            "I want to {v:explore} this {n:collection}",
            "Can you {v:help} me {v:explore} my {n:dataset}?",
            "I need {a|some} help with a {n:dataset}",
            "{v:analyse} my {n:data} please",
        ],
        Act::Describe { structural: false } => &[
            "{m:statistical}",
            "{m:statistical} please",
            "the {m:statistical} one",
            "{v:show} me the {n:statistics}",
        ],
        Act::Describe { structural: true } => &[
            "{m:structural}",
            "{m:structural} please",
            "{v:show} me the {n:structure}",
        ],
        Act::Request {
            action: ActionClass::Correlate,
        } => &[
            "{v:correlate} the {n:attribute}s",
            "{v:analyse} the linear {n:correlation} between each couple of numerical {n:attribute}s",
            "{v:show} me the {n:correlation} between {n:attribute}s",
            "{v:compute} the {n:correlation} {n:table}",
        ],
        Act::Request {
            action: ActionClass::Cluster,
        } => &[
            "{v:cluster} the {n:data}",
            "{v:classify} my {n:data}",
            "{v:show} me the {n:cluster}s",
            "{v:search} {n:cluster}s in the {n:data}",
        ],
        Act::Request {
            action: ActionClass::PlotRequest,
        } => &[
            "{v:plot} the {n:attribute}s",
            "{v:show} me some {n:plot}s",
            "{v:give} me a {n:plot} for each {n:attribute}",
        ],
        Act::Request { .. } => &["{v:analyse} my {n:data}"],
        Act::Accept => &["{m:yes}", "{m:yes} please", "{a|yes|ok}, go ahead"],
        Act::Reject => &["{a|no|nope|nah}", "{a|no|nope} thanks"],
        Act::Rate { rating: Rating::Like } => &["{m:good}", "that is {m:good}", "very {m:good}"],
        Act::Rate {
            rating: Rating::Dislike,
        } => &["{m:bad}", "that is {m:bad}", "quite {m:bad}"],
        Act::End => &[
            "{v:stop}",
            "{v:stop} the {n:session}",
            "{v:stop} please",
            "{v:give} me the {n:story}",
        ],
    }
}

fn word_class(code: &str) -> Option<WordClass> {
    match code {
        "v" => Some(WordClass::ActionVerb),
        "n" => Some(WordClass::ObjectNoun),
        "m" => Some(WordClass::Modifier),
        _ => None,
    }
}

/// Synonyms left out of realizations because they read as other intents.
const AWKWARD: &[&str] = &[
    "not",
    "upload",
    "send",
    "submit",
    "count",
    "look",
    "list",
    "print",
    "tell",
    "see",
    "return",
    "distribution",
];

/// Renders an act as a sentence using `rng` for frame and synonym choice.
pub fn realize(act: Act, vocabulary: &Vocabulary, rng: &mut impl Rng) -> String {
    let frame = frames(act).choose(rng).expect("every act has frames");
    let mut out = String::new();
    let mut rest = *frame;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("frames close their braces");
        let spec = &rest[open + 1..close];
        let (code, arg) = spec
            .split_once(if spec.contains(':') { ':' } else { '|' })
            .expect("frame slot");
        if code == "a" {
            let options: Vec<&str> = arg.split('|').collect();
            out.push_str(options.choose(rng).expect("literal options"));
        } else {
            let class = word_class(code).expect("known slot code");
            let entry = vocabulary.entry(class, arg).expect("frame lemma is in the vocabulary");
            let mut words: Vec<&str> = vec![entry.lemma.as_str()];
            words.extend(
                entry
                    .synonyms
                    .iter()
                    .map(String::as_str)
                    .filter(|w| !AWKWARD.contains(w) && !w.contains(' ')),
            );
            out.push_str(words.choose(rng).expect("at least the lemma"));
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

// ---------------------------------------------------------------- generation

/// Independent model of the suggestion ladder: (done op, offered action, op it runs).
const LADDER: [(ActionClass, ActionClass); 3] = [
    (ActionClass::Correlate, ActionClass::Cluster),
    (ActionClass::Cluster, ActionClass::PlotRequest),
    (ActionClass::PlotRequest, ActionClass::EndSession),
];

struct Simulated {
    done: Vec<ActionClass>,
    offered: BTreeSet<ActionClass>,
    suggestion: Option<ActionClass>,
}

impl Simulated {
    /// The next offer after an analysis completes: the profile unlocks
    /// correlation, each analysis unlocks the next ladder step.
    fn propose(&mut self) {
        let done = |a: ActionClass| self.done.contains(&a);
        let mut candidates = vec![(true, ActionClass::Correlate)];
        candidates.extend(LADDER.iter().map(|&(trigger, next)| (done(trigger), next)));
        self.suggestion = candidates
            .into_iter()
            .find(|&(triggered, next)| triggered && !done(next) && !self.offered.contains(&next))
            .map(|(_, next)| next);
        if let Some(a) = self.suggestion {
            self.offered.insert(a);
        }
    }
}

/// Template data that the gold composition reads.
struct GoldBuilder<'l> {
    library: &'l TemplateLibrary,
    plan: GoldPlan,
    instances: usize,
}

impl<'l> GoldBuilder<'l> {
    /// Appends one template instance; inputs it cannot feed itself come from
    /// the latest earlier producer, else from the session's active data.
    fn append(&mut self, name: &str) {
        let template = self.library.template(name).expect("shipped template");
        let prefix = format!("i{}", self.instances);
        self.instances += 1;
        let first = self.plan.nodes.len();
        for n in &template.nodes {
            self.plan.nodes.push(GoldNode {
                key: format!("{prefix}.{}", n.key),
                op: n.op.clone(),
                params: n.params.clone(),
            });
        }
        let own_edges: Vec<(String, String)> = template
            .edges
            .iter()
            .map(|(a, b)| (format!("{prefix}.{a}"), format!("{prefix}.{b}")))
            .collect();
        for i in first..self.plan.nodes.len() {
            let sig = self
                .library
                .signature(&self.plan.nodes[i].op)
                .expect("known op")
                .clone();
            let key = self.plan.nodes[i].key.clone();
            let upstream = upstream_within(&own_edges, &key);
            for input in &sig.inputs {
                let inside = upstream.iter().any(|k| {
                    let op = &self.plan.nodes[self.plan.nodes.iter().position(|n| &n.key == k).expect("own")].op;
                    self.library.signature(op).is_some_and(|s| s.outputs.contains(input))
                });
                if inside {
                    continue;
                }
                let producer = self.plan.nodes[..first]
                    .iter()
                    .rev()
                    .find(|n| self.library.signature(&n.op).is_some_and(|s| s.outputs.contains(input)));
                match producer {
                    Some(p) => {
                        let edge = (p.key.clone(), key.clone());
                        self.plan.edges.push(edge);
                    }
                    None => {
                        if let Some((param, value)) = session_ref(*input) {
                            self.plan.nodes[i]
                                .params
                                .insert(param.into(), Value::String(value.into()));
                        }
                    }
                }
            }
        }
        self.plan.edges.extend(own_edges);
    }
}

fn upstream_within(edges: &[(String, String)], key: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![key.to_string()];
    while let Some(k) = stack.pop() {
        for (a, b) in edges {
            if *b == k && seen.insert(a.clone()) {
                stack.push(a.clone());
            }
        }
    }
    seen
}

fn template_for(action: ActionClass) -> &'static str {
    match action {
        ActionClass::Correlate => "correlation_analysis",
        ActionClass::Cluster => "classification",
        ActionClass::PlotRequest => "histograms",
        other => unreachable!("no analysis template for {other}"),
    }
}

fn say(steps: &mut Vec<Step>, act: Act, intent: ActionClass, vocabulary: &Vocabulary, rng: &mut ChaCha8Rng) {
    steps.push(Step::Say {
        act,
        text: realize(act, vocabulary, rng),
        intent,
    });
}

fn maybe_noise(steps: &mut Vec<Step>, p: f64, vocabulary: &Vocabulary, rng: &mut ChaCha8Rng) {
    if rng.random_bool(p) {
        say(steps, Act::Noise, ActionClass::Unknown, vocabulary, rng);
    }
}

/// Samples one conversation from the pattern grammar and composes its gold plan.
fn generate_case(id: String, seed: u64, library: &TemplateLibrary, vocabulary: &Vocabulary) -> CorpusCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = Vec::new();
    let mut gold = GoldBuilder {
        library,
        plan: GoldPlan::default(),
        instances: 0,
    };

    maybe_noise(&mut steps, 0.3, vocabulary, &mut rng);
    say(
        &mut steps,
        Act::Handshake,
        ActionClass::ExploreHandshake,
        vocabulary,
        &mut rng,
    );
    gold.append("data_preparation");
    let fixture = FIXTURES.choose(&mut rng).expect("fixtures").0;
    steps.push(Step::Upload {
        fixture: fixture.to_string(),
    });
    let structural = rng.random_bool(0.3);
    let intent = if structural {
        ActionClass::DescribeStructural
    } else {
        ActionClass::DescribeStatistical
    };
    say(&mut steps, Act::Describe { structural }, intent, vocabulary, &mut rng);

    let mut sim = Simulated {
        done: Vec::new(),
        offered: BTreeSet::new(),
        suggestion: None,
    };
    sim.propose();
    let analyses = rng.random_range(1..=3);
    for _ in 0..analyses {
        let remaining: Vec<ActionClass> = [ActionClass::Correlate, ActionClass::Cluster, ActionClass::PlotRequest]
            .into_iter()
            .filter(|a| !sim.done.contains(a))
            .collect();
        maybe_noise(&mut steps, 0.15, vocabulary, &mut rng);
        let action = match sim.suggestion {
            Some(s) if remaining.contains(&s) && rng.random_bool(0.5) => {
                say(
                    &mut steps,
                    Act::Accept,
                    ActionClass::AcceptSuggestion,
                    vocabulary,
                    &mut rng,
                );
                s
            }
            _ => {
                let a = *remaining.choose(&mut rng).expect("an analysis remains");
                say(&mut steps, Act::Request { action: a }, a, vocabulary, &mut rng);
                a
            }
        };
        sim.suggestion = None;
        gold.append(template_for(action));
        sim.done.push(action);
        // every analysis template closes with a feedback question
        let (act, intent) = match rng.random_range(0..4) {
            0 => (Act::Accept, ActionClass::AcceptSuggestion),
            1 => (Act::Reject, ActionClass::RejectSuggestion),
            2 => (Act::Rate { rating: Rating::Like }, ActionClass::ProvideFeedback),
            _ => (
                Act::Rate {
                    rating: Rating::Dislike,
                },
                ActionClass::ProvideFeedback,
            ),
        };
        say(&mut steps, act, intent, vocabulary, &mut rng);
        sim.propose();
    }
    if sim.suggestion == Some(ActionClass::EndSession) && rng.random_bool(0.5) {
        say(
            &mut steps,
            Act::Accept,
            ActionClass::AcceptSuggestion,
            vocabulary,
            &mut rng,
        );
    } else {
        say(&mut steps, Act::End, ActionClass::EndSession, vocabulary, &mut rng);
    }
    // promoters lean positive without being uniform
    let recommend = [10, 9, 9, 8, 8, 7, 6, 5, 10, 3];
    let survey = Survey {
        recommend: Some(*recommend.choose(&mut rng).expect("scores")),
        satisfaction: Some(rng.random_range(2..=5)),
    };
    CorpusCase {
        id,
        seed,
        steps,
        gold_plan: gold.plan,
        survey: Some(survey),
    }
}

/// Generates `n` cases from the grammar, seed-pinned.
pub fn generate_corpus(seed: u64, n: usize, library: &TemplateLibrary, vocabulary: &Vocabulary) -> Corpus {
    Corpus {
        schema_version: CORPUS_SCHEMA_VERSION,
        corpus_id: format!("synthetic-{n}-seed{seed}"),
        seed,
        cases: (0..n)
            .map(|i| {
                generate_case(
                    format!("case-{:02}", i + 1),
                    seed.wrapping_mul(1000).wrapping_add(i as u64),
                    library,
                    vocabulary,
                )
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- running

/// Where uploads named by a corpus come from.
#[derive(Debug, Clone, Default)]
pub enum Fixtures {
    #[default]
    Shipped,
    /// Files in a directory, falling back to the shipped ones.
    Dir(PathBuf),
}

impl Fixtures {
    fn read(&self, name: &str) -> Result<Vec<u8>, String> {
        if let Fixtures::Dir(dir) = self {
            let path = dir.join(name);
            if path.is_file() {
                return std::fs::read(&path).map_err(|e| format!("cannot read {}: {e}", path.display()));
            }
        }
        shipped_fixture(name)
            .map(<[u8]>::to_vec)
            .ok_or_else(|| format!("unknown fixture `{name}`"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Re-realizes every utterance from this seed instead of the stored text.
    pub realization_seed: Option<u64>,
    pub fixtures: Fixtures,
    /// Run cases on separate threads.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub id: String,
    pub utterances: Vec<String>,
    pub intents_expected: usize,
    pub intents_matched: usize,
    pub m1_attempts: Vec<u32>,
    pub plan: PlanCounts,
    pub plan_scores: PlanScores,
    pub status: String,
    pub story: bool,
    /// sha256 over the session's artifact ids and payload hashes.
    pub artifact_digest: String,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub corpus_id: String,
    pub cases: usize,
    pub realization_seed: Option<u64>,
    pub intent_accuracy: f64,
    pub failed_cases: usize,
    pub metrics: MetricsReport,
    pub case_reports: Vec<CaseReport>,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "corpus {} ({} cases, {} with errors), intent accuracy {:.4}\n",
            self.corpus_id, self.cases, self.failed_cases, self.intent_accuracy
        );
        out.push_str(&self.metrics.table());
        for c in self.case_reports.iter().filter(|c| !c.errors.is_empty()) {
            out.push_str(&format!("{}: {}\n", c.id, c.errors.join("; ")));
        }
        out
    }
}

pub struct CorpusRun {
    pub report: CorpusReport,
    pub sessions: Vec<Session>,
}

fn artifact_digest(session: &Session) -> String {
    let mut h = Sha256::new();
    for a in &session.workspace.artifacts {
        h.update(a.id.as_bytes());
        h.update(b":");
        h.update(a.hash.as_bytes());
        h.update(b"\n");
    }
    format!("{:x}", h.finalize())
}

fn run_case(index: usize, case: &CorpusCase, options: &RunOptions) -> (CaseReport, Session) {
    let engine = Engine::with_clock(Arc::new(SteppingClock::default()));
    let library = &engine.templates;
    let mut session = engine.new_session_with_id(Uuid::from_u128(index as u128 + 1), "corpus", case.seed);
    let mut rng = options
        .realization_seed
        .map(|s| ChaCha8Rng::seed_from_u64(s.wrapping_mul(1000).wrapping_add(index as u64)));
    let mut errors = Vec::new();
    let mut utterances = Vec::new();
    let mut expected = Vec::new();
    for step in &case.steps {
        match step {
            Step::Say { act, text, intent } => {
                let text = match rng.as_mut() {
                    Some(r) => realize(*act, &engine.vocabulary, r),
                    None => text.clone(),
                };
                if let Err(e) = engine.handle_turn(&mut session, &text) {
                    errors.push(format!("`{text}`: {e}"));
                }
                expected.push(*intent);
                utterances.push(text);
            }
            Step::Upload { fixture } => match options.fixtures.read(fixture) {
                Ok(bytes) => {
                    if let Err(e) = engine.upload(&mut session, &bytes, fixture, None) {
                        errors.push(format!("upload {fixture}: {e}"));
                    }
                }
                Err(e) => errors.push(e),
            },
        }
    }
    if let Some(survey) = &case.survey {
        if let Err(e) = engine.record_survey(&mut session, survey.clone()) {
            errors.push(e.to_string());
        }
    }
    let parsed: Vec<ActionClass> = session
        .turns
        .iter()
        .filter(|t| t.speaker == Speaker::User && !t.upload)
        .map(|t| t.intent.unwrap_or(ActionClass::Unknown))
        .collect();
    let matched = expected.iter().zip(&parsed).filter(|(a, b)| a == b).count();
    let generated = session
        .plan
        .as_ref()
        .map(|p| PlanGraph::from_plan(p, library))
        .unwrap_or(PlanGraph {
            nodes: Vec::new(),
            edges: BTreeSet::new(),
        });
    let counts = m2(&generated, &case.gold_plan.to_graph(library));
    if let Some(plan) = &session.plan {
        for n in plan.nodes.iter().filter(|n| n.state == NodeState::Failed) {
            errors.push(format!(
                "node {} ({}) failed: {}",
                n.id,
                n.op_name,
                n.error.clone().unwrap_or_default()
            ));
        }
    }
    let report = CaseReport {
        id: case.id.clone(),
        utterances,
        intents_expected: expected.len(),
        intents_matched: matched,
        m1_attempts: m1_attempts(&session),
        plan: counts,
        plan_scores: counts.scores(),
        status: format!("{:?}", session.status),
        story: session.story.is_some(),
        artifact_digest: artifact_digest(&session),
        errors,
    };
    (report, session)
}

/// Drives the engine through every case and aggregates the metrics.
pub fn run_corpus(corpus: &Corpus, options: &RunOptions) -> Result<CorpusRun, CorpusSchemaError> {
    let library = TemplateLibrary::default_shipped();
    corpus.validate(&library)?;
    let results: Vec<(CaseReport, Session)> = if options.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = corpus
                .cases
                .iter()
                .enumerate()
                .map(|(i, c)| scope.spawn(move || run_case(i, c, options)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("case thread")).collect()
        })
    } else {
        corpus
            .cases
            .iter()
            .enumerate()
            .map(|(i, c)| run_case(i, c, options))
            .collect()
    };
    let (case_reports, sessions): (Vec<CaseReport>, Vec<Session>) = results.into_iter().unzip();
    let mut counts = PlanCounts::default();
    for c in &case_reports {
        counts.add(&c.plan);
    }
    let expected: usize = case_reports.iter().map(|c| c.intents_expected).sum();
    let matched: usize = case_reports.iter().map(|c| c.intents_matched).sum();
    let versions = Engine::with_clock(Arc::new(SteppingClock::default())).versions();
    let metrics = MetricsReport::from_sessions(&sessions, &versions).with_plan_counts(counts);
    Ok(CorpusRun {
        report: CorpusReport {
            corpus_id: corpus.corpus_id.clone(),
            cases: corpus.cases.len(),
            realization_seed: options.realization_seed,
            intent_accuracy: if expected == 0 {
                1.0
            } else {
                matched as f64 / expected as f64
            },
            failed_cases: case_reports.iter().filter(|c| !c.errors.is_empty()).count(),
            metrics,
            case_reports,
        },
        sessions,
    })
}
