//! The conversation engine: turns in, plans compiled and run, bot turns out.

mod proactive;

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use uuid::Uuid;

pub use proactive::{
    acceptance_rate, propose_proactive, rank_history, session_similarity, HistoryEntry, Knowledge, Suggestion,
    SuggestionOutcome, UserProfile,
};

use crate::catalog::{vars, MessageCatalog};
use crate::executor::{Artifact, ArtifactKind, Clock, Executor, OperationRegistry, SystemClock, UploadRef, Workspace};
use crate::intent::{parse, ActionClass, Intent, PendingKind, Rating, SheetSelector, Vocabulary};
use crate::planner::{MetaPattern, NodeId, PlanContext, TemplateLibrary};
use crate::session::{
    Pending, Session, SessionSnapshot, SessionStatus, SnapshotError, Speaker, StagedUpload, SuggestionRecord, Survey,
    Turn, Versions, SESSION_SCHEMA_VERSION,
};
use crate::storyteller::{build_story, StoryError};
use crate::tabular::{ingest, SheetSelection, TabularError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DialogueError {
    #[error("the session is {0:?}")]
    NotActive(SessionStatus),
    #[error("the message is empty")]
    EmptyUtterance,
    #[error("could not read {filename}: {error}")]
    Upload { filename: String, error: TabularError },
    #[error("there is no turn {0}")]
    NoSuchTurn(usize),
    #[error("turn {0} is not a bot turn")]
    NotABotTurn(usize),
    #[error("the session has no completed analysis to tell about")]
    EmptySession,
    #[error("survey answer {field} = {value} is outside {range}")]
    Survey {
        field: &'static str,
        value: u8,
        range: &'static str,
    },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl From<StoryError> for DialogueError {
    fn from(e: StoryError) -> Self {
        match e {
            StoryError::EmptySession => DialogueError::EmptySession,
        }
    }
}

impl DialogueError {
    pub fn remedy(&self) -> Option<&'static str> {
        match self {
            DialogueError::Upload { error, .. } => error.remedy(),
            DialogueError::NotActive(SessionStatus::Paused) => Some("Resume the session first."),
            _ => None,
        }
    }
}

/// What an upload produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadReply {
    /// Ingestion summary without cell data.
    pub report: Value,
    pub turns: Vec<Turn>,
}

/// Shared, read-only resources plus the cross-session knowledge.
pub struct Engine {
    pub vocabulary: Vocabulary,
    pub templates: TemplateLibrary,
    pub registry: OperationRegistry,
    pub catalog: MessageCatalog,
    clock: Arc<dyn Clock>,
    knowledge: RwLock<Knowledge>,
}

fn selection_value(selection: &SheetSelection) -> Value {
    match selection {
        SheetSelection::All => json!("all"),
        SheetSelection::First => json!("first"),
        SheetSelection::Names(n) => json!(n),
    }
}

fn selection_of(selector: &SheetSelector) -> SheetSelection {
    match selector {
        SheetSelector::All => SheetSelection::All,
        SheetSelector::First => SheetSelection::First,
        SheetSelector::Names(n) => SheetSelection::Names(n.clone()),
    }
}

fn pending_kind(op: &str) -> Option<PendingKind> {
    match op {
        "request_upload" | "upload_dataset" => Some(PendingKind::Upload),
        "choose_description" => Some(PendingKind::DescriptionChoice),
        "feedback" => Some(PendingKind::Feedback),
        _ => None,
    }
}

/// Actions that cannot run before a dataset is loaded.
fn needs_data(action: ActionClass) -> bool {
    matches!(
        action,
        ActionClass::TransformData
            | ActionClass::DescribeStructural
            | ActionClass::DescribeStatistical
            | ActionClass::Correlate
            | ActionClass::Cluster
            | ActionClass::PlotRequest
            | ActionClass::ExcludeAttribute
            | ActionClass::SelectSheet
    )
}

impl Engine {
    pub fn new(
        vocabulary: Vocabulary,
        templates: TemplateLibrary,
        catalog: MessageCatalog,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let registry = OperationRegistry::standard(&templates);
        Engine {
            vocabulary,
            templates,
            registry,
            catalog,
            clock,
            knowledge: RwLock::new(Knowledge::default()),
        }
    }

    /// Shipped vocabulary, templates and messages on the system clock.
    pub fn standard() -> Self {
        Engine::with_clock(Arc::new(SystemClock))
    }

    pub fn with_clock(clock: Arc<dyn Clock>) -> Self {
        Engine::new(
            Vocabulary::default_shipped(),
            TemplateLibrary::default_shipped(),
            MessageCatalog::default_shipped(),
            clock,
        )
    }

    pub fn clock(&self) -> &dyn Clock {
        &*self.clock
    }

    pub fn versions(&self) -> Versions {
        Versions {
            vocabulary: self.vocabulary.version().to_string(),
            templates: self.templates.version().to_string(),
            messages: self.catalog.version().to_string(),
        }
    }

    pub fn knowledge(&self) -> Knowledge {
        self.knowledge.read().expect("knowledge lock").clone()
    }

    pub fn set_knowledge(&self, knowledge: Knowledge) {
        *self.knowledge.write().expect("knowledge lock") = knowledge;
    }

    pub fn profile(&self, user_id: &str) -> UserProfile {
        self.knowledge
            .read()
            .expect("knowledge lock")
            .profiles
            .get(user_id)
            .cloned()
            .unwrap_or_else(|| UserProfile::new(user_id))
    }

    fn executor(&self) -> Executor<'_> {
        Executor {
            registry: &self.registry,
            catalog: &self.catalog,
            clock: &*self.clock,
        }
    }

    pub fn new_session(&self, user_id: &str, seed: u64) -> Session {
        self.new_session_with_id(Uuid::new_v4(), user_id, seed)
    }

    pub fn new_session_with_id(&self, id: Uuid, user_id: &str, seed: u64) -> Session {
        Session {
            schema_version: SESSION_SCHEMA_VERSION,
            id,
            user_id: user_id.to_string(),
            status: SessionStatus::Active,
            created_at: self.clock.now(),
            turns: Vec::new(),
            plan: None,
            workspace: Workspace::new(seed),
            pending: None,
            staged_upload: None,
            suggestions: Vec::new(),
            story: None,
            warnings: Vec::new(),
            survey: None,
            versions: self.versions(),
        }
    }

    fn push_turn(&self, s: &mut Session, speaker: Speaker, text: String, tag: Option<MetaPattern>) -> usize {
        let index = s.turns.len();
        s.turns.push(Turn {
            index,
            speaker,
            text,
            pattern_tag: tag,
            artifacts: Vec::new(),
            feedback: None,
            timestamp: self.clock.now(),
            intent: None,
            upload: false,
            node: None,
        });
        index
    }

    fn bot(&self, s: &mut Session, text: String, tag: MetaPattern) -> usize {
        self.push_turn(s, Speaker::Bot, text, Some(tag))
    }

    fn say(&self, s: &mut Session, key: &str, tag: MetaPattern) -> usize {
        let text = self.catalog.text(key);
        self.bot(s, text, tag)
    }

    fn require_active(s: &Session) -> Result<(), DialogueError> {
        match s.status {
            SessionStatus::Active => Ok(()),
            other => Err(DialogueError::NotActive(other)),
        }
    }

    /// Handles one user utterance and returns the bot's replies.
    pub fn handle_turn(&self, s: &mut Session, utterance: &str) -> Result<Vec<Turn>, DialogueError> {
        Self::require_active(s)?;
        let text = utterance.trim();
        if text.is_empty() {
            return Err(DialogueError::EmptyUtterance);
        }
        let intent = parse(&self.vocabulary, text, &s.context());
        let user = self.push_turn(s, Speaker::User, text.to_string(), None);
        s.turns[user].intent = (intent.action != ActionClass::Unknown).then_some(intent.action);
        let start = s.turns.len();
        self.respond(s, intent, text);
        if s.turns.len() == start {
            self.say(s, "ack", MetaPattern::P3ActionRequest);
        }
        s.turns[user].pattern_tag = s.turns[start].pattern_tag;
        Ok(s.turns[start..].to_vec())
    }

    fn respond(&self, s: &mut Session, intent: Intent, text: &str) {
        let pending = s.pending.clone();
        let pending_kind = pending.as_ref().map(|p| p.kind);
        match intent.action {
            ActionClass::Unknown => self.clarify(s, text),
            ActionClass::PauseSession => {
                let msg = self
                    .catalog
                    .render("session.pause", &vars([("session_id", s.id.to_string())]));
                self.bot(s, msg, MetaPattern::P3ActionRequest);
                s.status = SessionStatus::Paused;
            }
            ActionClass::ResumeSession => {
                self.say(s, "session.resume", MetaPattern::P3ActionRequest);
            }
            ActionClass::EndSession => {
                self.settle_suggestion(s, ActionClass::EndSession);
                self.finish(s);
            }
            ActionClass::AcceptSuggestion | ActionClass::RejectSuggestion | ActionClass::ProvideFeedback => {
                self.answer(s, &intent, pending)
            }
            ActionClass::TransformData | ActionClass::SelectSheet if pending_kind == Some(PendingKind::SheetChoice) => {
                let selection = intent
                    .slots
                    .sheet_selector
                    .as_ref()
                    .map(selection_of)
                    .unwrap_or_default();
                self.choose_sheets(s, selection);
            }
            ActionClass::DescribeStatistical | ActionClass::DescribeStructural
                if pending_kind == Some(PendingKind::DescriptionChoice) =>
            {
                let mode = if intent.action == ActionClass::DescribeStatistical {
                    "statistical"
                } else {
                    "structural"
                };
                self.choose_description(s, mode);
            }
            _ => self.request(s, intent),
        }
    }

    fn reask(&self, s: &mut Session) {
        if let Some(p) = &s.pending {
            let text = s.turns[p.turn].text.clone();
            let msg = self.catalog.render("clarify.repeat", &vars([("question", text)]));
            self.bot(s, msg, MetaPattern::P4BotRequestsInput);
        }
    }

    fn clarify(&self, s: &mut Session, text: &str) {
        let msg = self.catalog.render("clarify", &vars([("utterance", text.to_string())]));
        self.bot(s, msg, MetaPattern::P4BotRequestsInput);
        self.reask(s);
    }

    fn answer(&self, s: &mut Session, intent: &Intent, pending: Option<Pending>) {
        let accept = intent.action == ActionClass::AcceptSuggestion;
        let reject = intent.action == ActionClass::RejectSuggestion;
        let Some(p) = pending else {
            // a rating with nothing pending goes to the latest result shown
            if let Some(rating) = intent.slots.rating {
                let target = s
                    .turns
                    .iter()
                    .rev()
                    .find(|t| t.speaker == Speaker::Bot && !t.artifacts.is_empty())
                    .map(|t| t.index);
                if let Some(idx) = target {
                    let _ = self.record_feedback(s, idx, rating);
                    let key = if rating == Rating::Like {
                        "feedback.like"
                    } else {
                        "feedback.dislike"
                    };
                    self.say(s, key, MetaPattern::P5BotOffersOutput);
                    return;
                }
            }
            self.say(s, "ack", MetaPattern::P3ActionRequest);
            return;
        };
        match p.kind {
            PendingKind::Feedback => {
                let rating = intent.slots.rating.or(if accept {
                    Some(Rating::Like)
                } else if reject {
                    Some(Rating::Dislike)
                } else {
                    None
                });
                self.give_feedback(s, p, rating);
            }
            PendingKind::Suggestion => {
                let action = p.suggestion.unwrap_or(ActionClass::Unknown);
                if accept {
                    self.settle_suggestion(s, action);
                    if action == ActionClass::EndSession {
                        self.finish(s);
                    } else {
                        self.request(s, Intent::from_action(action));
                    }
                } else if reject {
                    self.settle_suggestion(s, ActionClass::RejectSuggestion);
                    self.say(s, "suggest.declined", MetaPattern::P3ActionRequest);
                } else {
                    self.say(s, "ack", MetaPattern::P3ActionRequest);
                    self.reask(s);
                }
            }
            PendingKind::SheetChoice if accept => self.choose_sheets(s, SheetSelection::All),
            PendingKind::SheetChoice if reject => {
                let names = s
                    .staged_upload
                    .as_ref()
                    .map(|st| st.sheet_names.join(", "))
                    .unwrap_or_default();
                let msg = self.catalog.render("ask.sheet_name", &vars([("names", names)]));
                let idx = self.bot(s, msg, MetaPattern::P1DataPreparation);
                if let Some(pending) = s.pending.as_mut() {
                    pending.turn = idx;
                }
            }
            _ => {
                let text = s.turns[s.turns.len() - 1].text.clone();
                self.clarify(s, &text);
            }
        }
    }

    /// Marks an offered suggestion as answered by `action`.
    fn settle_suggestion(&self, s: &mut Session, action: ActionClass) {
        if let Some(p) = &s.pending {
            if p.kind == PendingKind::Suggestion {
                let offered = p.suggestion;
                let turn = p.turn;
                if let Some(rec) = s.suggestions.iter_mut().rev().find(|r| r.turn == turn) {
                    rec.accepted = Some(offered == Some(action));
                }
                s.pending = None;
            }
        }
    }

    /// Answers whatever question is open with its default so a new request can run.
    fn settle_pending(&self, s: &mut Session, action: ActionClass) {
        let Some(p) = s.pending.clone() else { return };
        match p.kind {
            PendingKind::Suggestion => self.settle_suggestion(s, action),
            PendingKind::Feedback => {
                s.pending = None;
                if let Some(node) = p.node {
                    self.provide_and_step(s, node, json!({}));
                }
            }
            PendingKind::DescriptionChoice => {
                s.pending = None;
                if let Some(node) = p.node {
                    self.provide_and_step(s, node, json!({"mode": "statistical"}));
                }
            }
            PendingKind::SheetChoice => self.choose_sheets(s, SheetSelection::All),
            PendingKind::Upload => {}
        }
    }

    fn provide_and_step(&self, s: &mut Session, node: NodeId, value: Value) {
        let Session { plan, workspace, .. } = s;
        let Some(plan) = plan.as_mut() else { return };
        if let Err(e) = self.executor().provide_user_input(plan, workspace, node, value) {
            let msg = self.catalog.render("failure.plan", &vars([("error", e.to_string())]));
            self.bot(s, msg, MetaPattern::P4BotRequestsInput);
            return;
        }
        self.step(s);
    }

    /// Runs the plan and reports; returns false if anything failed.
    fn step(&self, s: &mut Session) -> bool {
        let Session { plan, workspace, .. } = s;
        let Some(plan) = plan.as_mut() else { return true };
        match self.executor().step(plan, workspace) {
            Ok(outcome) => {
                let ok = outcome.failed.is_empty();
                let plan = s.plan.clone().expect("present");
                for aid in &outcome.new_artifacts {
                    let art = s.workspace.artifact(aid).expect("just recorded").clone();
                    if !art.visible {
                        continue;
                    }
                    let node = art.node_id.and_then(|n| plan.node(n));
                    let tag = node.map(|n| n.pattern).unwrap_or(MetaPattern::P5BotOffersOutput);
                    let idx = self.bot(s, art.explanation.clone(), tag);
                    s.turns[idx].artifacts.push(art.id.clone());
                    s.turns[idx].node = art.node_id;
                }
                for f in &outcome.failed {
                    let recovery = f.remedy.clone().unwrap_or_else(|| self.catalog.text("recovery"));
                    let msg = self.catalog.render(
                        "failure",
                        &vars([
                            ("op", f.op_name.clone()),
                            ("error", f.error.clone()),
                            ("recovery", recovery),
                        ]),
                    );
                    let tag = plan
                        .node(f.node)
                        .map(|n| n.pattern)
                        .unwrap_or(MetaPattern::P2AnalyticsTask);
                    let idx = self.bot(s, msg, tag);
                    s.turns[idx].node = Some(f.node);
                }
                if let Some(id) = outcome.awaiting {
                    self.ask(s, id);
                }
                ok
            }
            Err(e) => {
                let msg = self.catalog.render("failure.plan", &vars([("error", e.to_string())]));
                self.bot(s, msg, MetaPattern::P4BotRequestsInput);
                false
            }
        }
    }

    fn ask(&self, s: &mut Session, node_id: NodeId) {
        let node = s
            .plan
            .as_ref()
            .and_then(|p| p.node(node_id))
            .expect("awaiting node exists")
            .clone();
        let Some(kind) = pending_kind(&node.op_name) else {
            return;
        };
        let text = self.catalog.text(&format!("ask.{}", node.op_name));
        let idx = self.bot(s, text, node.pattern);
        s.turns[idx].node = Some(node_id);
        s.pending = Some(Pending {
            kind,
            node: Some(node_id),
            turn: idx,
            suggestion: None,
        });
    }

    fn request(&self, s: &mut Session, intent: Intent) {
        let action = intent.action;
        if s.pending.as_ref().map(|p| p.kind) == Some(PendingKind::Upload) {
            if needs_data(action) {
                self.say(s, "need_data", MetaPattern::P4BotRequestsInput);
            }
            self.reask(s);
            return;
        }
        self.settle_pending(s, action);
        if needs_data(action) && !s.workspace.dataset_loaded() {
            self.say(s, "need_data", MetaPattern::P4BotRequestsInput);
            self.run_plan(s, &Intent::from_action(ActionClass::ExploreHandshake), false);
            return;
        }
        let loaded = s.workspace.dataset_loaded();
        if self.run_plan(s, &intent, loaded) {
            self.maybe_propose(s);
        }
    }

    fn run_plan(&self, s: &mut Session, intent: &Intent, dataset_loaded: bool) -> bool {
        let ctx = PlanContext { dataset_loaded };
        let compiled = match &s.plan {
            None => self.templates.compile(intent, &ctx),
            Some(p) => self.templates.merge_followup(p, intent, &ctx),
        };
        match compiled {
            Ok(plan) => {
                s.plan = Some(plan);
                self.step(s)
            }
            Err(e) => {
                let msg = self.catalog.render("failure.plan", &vars([("error", e.to_string())]));
                self.bot(s, msg, MetaPattern::P4BotRequestsInput);
                false
            }
        }
    }

    fn maybe_propose(&self, s: &mut Session) {
        if s.pending.is_some() || s.status != SessionStatus::Active {
            return;
        }
        let history = self.knowledge.read().expect("knowledge lock").history.clone();
        if let Some(sugg) = propose_proactive(s, &history) {
            let idx = self.say(s, &format!("suggest.{}", sugg.action), MetaPattern::P6Proactive);
            s.suggestions.push(SuggestionRecord {
                action: sugg.action,
                score: sugg.score,
                turn: idx,
                accepted: None,
            });
            s.pending = Some(Pending {
                kind: PendingKind::Suggestion,
                node: None,
                turn: idx,
                suggestion: Some(sugg.action),
            });
        }
    }

    /// The offer the ladder would make now, without recording it.
    pub fn propose_proactive(&self, s: &Session) -> Option<Suggestion> {
        let history = self.knowledge.read().expect("knowledge lock").history.clone();
        propose_proactive(s, &history)
    }

    fn give_feedback(&self, s: &mut Session, p: Pending, rating: Option<Rating>) {
        s.pending = None;
        if let Some(r) = rating {
            let _ = self.record_feedback(s, p.turn, r);
        }
        if let Some(node) = p.node {
            let mut answer = serde_json::Map::new();
            if let Some(r) = rating {
                answer.insert("rating".into(), json!(r));
            }
            answer.insert("turn".into(), json!(p.turn));
            self.provide_and_step(s, node, Value::Object(answer));
        }
        let key = match rating {
            Some(Rating::Like) => "feedback.like",
            Some(Rating::Dislike) => "feedback.dislike",
            None => "feedback.none",
        };
        self.say(s, key, MetaPattern::P5BotOffersOutput);
        self.maybe_propose(s);
    }

    fn choose_description(&self, s: &mut Session, mode: &str) {
        let node = s.pending.take().and_then(|p| p.node);
        if let Some(node) = node {
            self.provide_and_step(s, node, json!({ "mode": mode }));
        }
        self.maybe_propose(s);
    }

    fn choose_sheets(&self, s: &mut Session, selection: SheetSelection) {
        let Some(staged) = s.staged_upload.clone() else {
            s.pending = None;
            return;
        };
        if let SheetSelection::Names(names) = &selection {
            if let Some(unknown) = names.iter().find(|n| !staged.sheet_names.contains(n)) {
                let msg = self.catalog.render(
                    "sheet.unknown",
                    &vars([("name", unknown.clone()), ("names", staged.sheet_names.join(", "))]),
                );
                self.bot(s, msg, MetaPattern::P1DataPreparation);
                return;
            }
        }
        s.staged_upload = None;
        s.pending = None;
        self.bind_upload(s, staged.node, &staged.upload, Some(&selection));
    }

    fn bind_upload(&self, s: &mut Session, node: NodeId, upload: &UploadRef, selection: Option<&SheetSelection>) {
        let mut value = json!({ "blob": upload.hash, "filename": upload.filename, "size": upload.size });
        if let Some(sel) = selection {
            value["sheets"] = selection_value(sel);
        }
        s.workspace.active_upload = Some(upload.clone());
        self.provide_and_step(s, node, value);
    }

    /// Receives a file. Before any handshake this starts data preparation.
    pub fn upload(
        &self,
        s: &mut Session,
        bytes: &[u8],
        filename: &str,
        selection: Option<SheetSelection>,
    ) -> Result<UploadReply, DialogueError> {
        Self::require_active(s)?;
        let report = ingest(bytes, filename, selection.as_ref().unwrap_or(&SheetSelection::All)).map_err(|error| {
            DialogueError::Upload {
                filename: filename.to_string(),
                error,
            }
        })?;
        let text = self.catalog.render(
            "upload.turn",
            &vars([("filename", filename.to_string()), ("size", bytes.len().to_string())]),
        );
        let user = self.push_turn(s, Speaker::User, text, Some(MetaPattern::P1DataPreparation));
        s.turns[user].upload = true;
        let start = s.turns.len();
        let hash = s.workspace.blobs.put(bytes.to_vec());
        let upload = UploadRef {
            hash,
            filename: filename.to_string(),
            size: bytes.len(),
        };

        let awaiting_upload = s
            .pending
            .as_ref()
            .filter(|p| p.kind == PendingKind::Upload)
            .and_then(|p| p.node);
        let mut node = match awaiting_upload {
            Some(n) => n,
            None => {
                self.settle_pending(s, ActionClass::ExploreHandshake);
                s.staged_upload = None;
                let handshake = Intent::from_action(ActionClass::ExploreHandshake);
                let ctx = PlanContext { dataset_loaded: false };
                let compiled = match &s.plan {
                    None => self.templates.compile(&handshake, &ctx),
                    Some(p) => self.templates.merge_followup(p, &handshake, &ctx),
                };
                let plan = compiled.expect("the data preparation template exists");
                let first = plan
                    .nodes
                    .iter()
                    .map(|n| n.id)
                    .filter(|id| s.plan.as_ref().is_none_or(|p| p.node(*id).is_none()))
                    .min()
                    .expect("new nodes");
                s.plan = Some(plan);
                let Session { plan, workspace, .. } = &mut *s;
                let plan = plan.as_mut().expect("set");
                let _ = self.executor().step(plan, workspace);
                first
            }
        };
        s.pending = None;
        // the bot's upload request is implicit in an upload
        if s.plan
            .as_ref()
            .and_then(|p| p.node(node))
            .is_some_and(|n| n.op_name == "request_upload")
        {
            let Session { plan, workspace, .. } = &mut *s;
            let plan = plan.as_mut().expect("present");
            let exec = self.executor();
            if exec.provide_user_input(plan, workspace, node, json!({})).is_ok() {
                if let Ok(out) = exec.step(plan, workspace) {
                    if let Some(next) = out.awaiting {
                        node = next;
                    }
                }
            }
        }
        let multi = report.sheets_found > 1;
        let preset = s
            .plan
            .as_ref()
            .and_then(|p| {
                p.successors(node)
                    .into_iter()
                    .find_map(|succ| p.node(succ).filter(|n| n.op_name == "transform"))
            })
            .is_some_and(|n| n.params.contains_key("sheets"));
        if multi && selection.is_none() && !preset {
            s.staged_upload = Some(StagedUpload {
                upload,
                node,
                sheet_names: report.sheet_names.clone(),
            });
            let msg = self.catalog.render(
                "ask.sheet_choice",
                &vars([
                    ("count", report.sheets_found.to_string()),
                    ("names", report.sheet_names.join(", ")),
                ]),
            );
            let idx = self.bot(s, msg, MetaPattern::P1DataPreparation);
            s.turns[idx].node = Some(node);
            s.pending = Some(Pending {
                kind: PendingKind::SheetChoice,
                node: Some(node),
                turn: idx,
                suggestion: None,
            });
        } else {
            self.bind_upload(s, node, &upload, selection.as_ref());
        }
        if s.turns.len() == start {
            self.say(s, "ack", MetaPattern::P1DataPreparation);
        }
        Ok(UploadReply {
            report: report.summary(),
            turns: s.turns[start..].to_vec(),
        })
    }

    /// Stores a rating on a bot turn. Returns a warning when it replaced one.
    pub fn record_feedback(
        &self,
        s: &mut Session,
        turn: usize,
        rating: Rating,
    ) -> Result<Option<String>, DialogueError> {
        let t = s.turns.get(turn).ok_or(DialogueError::NoSuchTurn(turn))?;
        if t.speaker != Speaker::Bot {
            return Err(DialogueError::NotABotTurn(turn));
        }
        let previous = t.feedback;
        if previous == Some(rating) {
            return Ok(None);
        }
        let kinds = self.plot_kinds_of(s, turn);
        s.turns[turn].feedback = Some(rating);
        {
            let mut k = self.knowledge.write().expect("knowledge lock");
            let profile = k
                .profiles
                .entry(s.user_id.clone())
                .or_insert_with(|| UserProfile::new(s.user_id.clone()));
            for kind in kinds {
                let count = profile.plot_kind_likes.entry(kind).or_insert(0);
                if previous == Some(Rating::Like) {
                    *count = count.saturating_sub(1);
                }
                if rating == Rating::Like {
                    *count += 1;
                }
            }
        }
        Ok(previous.map(|old| {
            let warning = format!("turn {turn}: rating {old:?} replaced by {rating:?}");
            tracing::warn!(session = %s.id, "{warning}");
            s.warnings.push(warning.clone());
            warning
        }))
    }

    /// Plot kinds a turn shows; a feedback question covers the plots of its analysis.
    fn plot_kinds_of(&self, s: &Session, turn: usize) -> Vec<crate::storyteller::PlotKind> {
        let t = &s.turns[turn];
        let mut ids: Vec<&str> = t.artifacts.iter().map(String::as_str).collect();
        let plan = s.plan.as_ref();
        if let Some(node) = t.node.and_then(|n| plan.and_then(|p| p.node(n))) {
            if node.op_name == "feedback" {
                let instance = node.instance;
                for a in &s.workspace.artifacts {
                    let same = a
                        .node_id
                        .and_then(|n| plan.and_then(|p| p.node(n)))
                        .is_some_and(|n| n.instance == instance);
                    if same && a.kind == ArtifactKind::PlotSvg && a.visible {
                        ids.push(&a.id);
                    }
                }
            }
        }
        let mut kinds: Vec<_> = ids
            .iter()
            .filter_map(|id| s.workspace.artifact(id))
            .filter_map(|a| a.plot_kind)
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    fn record_history(&self, s: &Session) {
        if let Some(entry) = HistoryEntry::from_session(s) {
            let mut k = self.knowledge.write().expect("knowledge lock");
            let before = k.history.len();
            k.history.retain(|e| e.session_id != entry.session_id);
            let is_new = k.history.len() == before;
            k.history.push(entry);
            if is_new {
                let profile = k
                    .profiles
                    .entry(s.user_id.clone())
                    .or_insert_with(|| UserProfile::new(s.user_id.clone()));
                profile.completed_sessions += 1;
            }
        }
    }

    fn finish(&self, s: &mut Session) {
        match self.end_session(s) {
            Ok(story) => {
                let idx = self.say(s, "end.story", MetaPattern::P3ActionRequest);
                s.turns[idx].artifacts.push(story.id);
                // the closing turn moves the completion time
                self.record_history(s);
            }
            Err(_) => {
                self.say(s, "end.empty", MetaPattern::P3ActionRequest);
                s.pending = None;
                s.status = SessionStatus::Abandoned;
                self.record_history(s);
            }
        }
    }

    /// Writes the story and completes the session.
    pub fn end_session(&self, s: &mut Session) -> Result<Artifact, DialogueError> {
        if !matches!(s.status, SessionStatus::Active | SessionStatus::Paused) {
            return Err(DialogueError::NotActive(s.status));
        }
        let markdown = build_story(s, &self.catalog)?;
        let hash = s.workspace.blobs.put(markdown.into_bytes());
        let artifact = Artifact {
            id: format!("art-{:04}", s.workspace.artifacts.len() + 1),
            kind: ArtifactKind::StoryDoc,
            node_id: None,
            provides: None,
            hash,
            media_type: "text/markdown".into(),
            title: "Story".into(),
            explanation: self.catalog.text("end.story"),
            plot_kind: None,
            meta: Value::Null,
            visible: true,
        };
        s.workspace.artifacts.push(artifact.clone());
        s.story = Some(artifact.id.clone());
        s.status = SessionStatus::Completed;
        s.pending = None;
        self.record_history(s);
        Ok(artifact)
    }

    /// Pauses an active session and captures its snapshot.
    pub fn pause(&self, s: &mut Session) -> Result<SessionSnapshot, DialogueError> {
        Self::require_active(s)?;
        s.status = SessionStatus::Paused;
        Ok(SessionSnapshot::capture(s, self.clock.now()))
    }

    /// Reactivates a paused session; an active one is left as is.
    pub fn resume(&self, s: &mut Session) -> Result<(), DialogueError> {
        match s.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Paused => {
                s.status = SessionStatus::Active;
                Ok(())
            }
            other => Err(DialogueError::NotActive(other)),
        }
    }

    /// Stores survey answers; allowed once the session is open or finished.
    pub fn record_survey(&self, s: &mut Session, survey: Survey) -> Result<(), DialogueError> {
        if let Some(v) = survey.recommend.filter(|v| *v > 10) {
            return Err(DialogueError::Survey {
                field: "recommend",
                value: v,
                range: "0..=10",
            });
        }
        if let Some(v) = survey.satisfaction.filter(|v| !(1..=5).contains(v)) {
            return Err(DialogueError::Survey {
                field: "satisfaction",
                value: v,
                range: "1..=5",
            });
        }
        s.survey = Some(survey);
        Ok(())
    }

    /// Rebuilds and reactivates a session from snapshot JSON.
    pub fn restore(&self, snapshot_json: &str) -> Result<Session, DialogueError> {
        let mut session = SessionSnapshot::from_json(snapshot_json)?.into_session()?;
        self.resume(&mut session)?;
        Ok(session)
    }
}
