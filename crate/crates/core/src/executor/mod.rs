//! Runs plans: resolves operations against the registry, suspends on
//! interaction nodes, records artifacts and a transition log.

mod artifacts;
pub mod ops;
mod registry;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use artifacts::{
    extension, sha256_hex, Artifact, ArtifactKind, BlobStore, Clock, SteppingClock, SystemClock, UploadRef, Workspace,
};
pub use ops::ProfileDoc;
pub use registry::{
    describe_value, Datum, FieldSpec, FieldType, InputContract, NewArtifact, OpContext, OpEntry, OpFn, OpOutput,
    OperationRegistry,
};

use crate::catalog::MessageCatalog;
use crate::clustering::ClusteringError;
use crate::planner::{
    DataKind, NodeId, NodeKind, NodeState, Plan, ACTIVE_DATASET, ACTIVE_UPLOAD, TABLE_REF_PARAM, UPLOAD_REF_PARAM,
};
use crate::profiler::ProfilerError;
use crate::storyteller::PlotError;
use crate::tabular::{parse_csv, TabularError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Profiler(#[from] ProfilerError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("no {0:?} input is available")]
    MissingInput(DataKind),
    #[error("parameter `{name}`: {message}")]
    Param { name: String, message: String },
    #[error("stored payload {0} is unreadable: {1}")]
    Payload(String, String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
}

impl OpError {
    pub fn remedy(&self) -> Option<&'static str> {
        match self {
            OpError::Tabular(e) => e.remedy(),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("node {node}: operation `{op_name}` is not in the registry")]
    Resolution { node: NodeId, op_name: String },
    #[error("node {node} is {state:?}, not awaiting input")]
    WrongState { node: NodeId, state: NodeState },
    #[error("node {node}: field `{field}` expects {expected}, got {found}")]
    TypeMismatch {
        node: NodeId,
        field: String,
        expected: String,
        found: String,
    },
    #[error("no node {0} in the plan")]
    UnknownNode(NodeId),
    #[error("plan cannot run: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub node_id: NodeId,
    pub from: NodeState,
    pub to: NodeState,
    pub detail: String,
}

/// Append-only record of node state transitions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    records: Vec<LogRecord>,
}

impl ExecutionLog {
    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    fn push(&mut self, clock: &dyn Clock, node_id: NodeId, from: NodeState, to: NodeState, detail: String) {
        debug_assert!(transition_allowed(from, to), "{from:?} -> {to:?}");
        self.records.push(LogRecord {
            seq: self.records.len() as u64,
            timestamp: clock.now(),
            node_id,
            from,
            to,
            detail,
        });
    }
}

/// The node state machine.
pub fn transition_allowed(from: NodeState, to: NodeState) -> bool {
    use NodeState::*;
    matches!(
        (from, to),
        (Pending, Ready)
            | (Pending, Skipped)
            | (Ready, Running)
            | (Ready, AwaitingUser)
            | (AwaitingUser, Ready)
            | (Running, Completed)
            | (Running, Failed)
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub node: NodeId,
    pub op_name: String,
    pub error: String,
    pub remedy: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub ran: Vec<NodeId>,
    pub awaiting: Option<NodeId>,
    pub done: bool,
    pub new_artifacts: Vec<String>,
    pub failed: Vec<NodeFailure>,
    pub skipped: Vec<NodeId>,
}

pub struct Executor<'a> {
    pub registry: &'a OperationRegistry,
    pub catalog: &'a MessageCatalog,
    pub clock: &'a dyn Clock,
}

fn set_state(plan: &mut Plan, log: &mut ExecutionLog, clock: &dyn Clock, id: NodeId, to: NodeState, detail: String) {
    let node = plan.node_mut(id).expect("node exists");
    let from = node.state;
    node.state = to;
    log.push(clock, id, from, to, detail);
}

/// First node awaiting user input, in execution order.
pub fn awaiting_node(plan: &Plan) -> Option<NodeId> {
    let order = plan.topological_order().ok()?;
    order
        .into_iter()
        .find(|id| plan.node(*id).is_some_and(|n| n.state == NodeState::AwaitingUser))
}

pub fn plan_done(plan: &Plan) -> bool {
    plan.nodes.iter().all(|n| n.state.is_settled())
}

fn upload_from_bound(bound: &BTreeMap<String, Value>) -> Option<UploadRef> {
    Some(UploadRef {
        hash: bound.get("blob")?.as_str()?.to_string(),
        filename: bound.get("filename")?.as_str()?.to_string(),
        size: bound.get("size")?.as_u64()? as usize,
    })
}

/// Decodes an artifact payload into the value an operation consumes.
pub fn load_datum(ws: &Workspace, artifact: &Artifact) -> Result<Datum, OpError> {
    let bytes = ws
        .blobs
        .get(&artifact.hash)
        .ok_or_else(|| OpError::Payload(artifact.id.clone(), "payload bytes are missing".into()))?;
    let bad = |e: String| OpError::Payload(artifact.id.clone(), e);
    let json_err = |e: serde_json::Error| bad(e.to_string());
    Ok(match artifact.kind {
        ArtifactKind::TableRef => Datum::Table(parse_csv(bytes, ',', &artifact.title).map_err(|e| bad(e.to_string()))?),
        ArtifactKind::Profile => Datum::Profile(serde_json::from_slice(bytes).map_err(json_err)?),
        ArtifactKind::CorrelationMatrix => Datum::Correlation(serde_json::from_slice(bytes).map_err(json_err)?),
        ArtifactKind::PruningReport => Datum::Pruning(serde_json::from_slice(bytes).map_err(json_err)?),
        ArtifactKind::ClusterResult => Datum::Clusters(serde_json::from_slice(bytes).map_err(json_err)?),
        ArtifactKind::PlotSvg | ArtifactKind::StoryDoc => {
            return Err(bad("plots and stories do not feed operations".into()))
        }
    })
}

impl Executor<'_> {
    /// Defaults, then answers given to interaction predecessors, then the
    /// node's own params.
    pub fn effective_params(&self, plan: &Plan, id: NodeId) -> BTreeMap<String, Value> {
        let node = plan.node(id).expect("node exists");
        let mut params = self
            .registry
            .get(&node.op_name)
            .map(|e| e.defaults.clone())
            .unwrap_or_default();
        for p in plan.predecessors(id) {
            let pred = plan.node(p).expect("edge endpoints exist");
            if pred.kind.is_interaction() && pred.state == NodeState::Completed {
                for (k, v) in &pred.bound {
                    params.insert(k.clone(), v.clone());
                }
            }
        }
        for (k, v) in &node.params {
            params.insert(k.clone(), v.clone());
        }
        params
    }

    fn resolve_input(
        &self,
        plan: &Plan,
        ws: &Workspace,
        id: NodeId,
        kind: DataKind,
        params: &BTreeMap<String, Value>,
    ) -> Result<Datum, OpError> {
        let mut ancestors: Vec<NodeId> = plan.ancestors(id).into_iter().collect();
        ancestors.sort_unstable_by(|a, b| b.cmp(a));
        for a in ancestors {
            let node = plan.node(a).expect("ancestor exists");
            if node.state != NodeState::Completed {
                continue;
            }
            if kind == DataKind::Upload && node.kind == NodeKind::UserAction {
                if let Some(u) = upload_from_bound(&node.bound) {
                    return Ok(Datum::Upload(u));
                }
            }
            let found = node
                .outputs
                .iter()
                .filter_map(|aid| ws.artifact(aid))
                .find(|art| art.provides == Some(kind));
            if let Some(art) = found {
                return load_datum(ws, art);
            }
        }
        let session_ref = |param: &str, value: &str| params.get(param).and_then(Value::as_str) == Some(value);
        match kind {
            DataKind::Table if session_ref(TABLE_REF_PARAM, ACTIVE_DATASET) => {
                let art = ws
                    .active_table
                    .as_deref()
                    .and_then(|aid| ws.artifact(aid))
                    .ok_or(OpError::MissingInput(kind))?;
                load_datum(ws, art)
            }
            DataKind::Upload if session_ref(UPLOAD_REF_PARAM, ACTIVE_UPLOAD) => ws
                .active_upload
                .clone()
                .map(Datum::Upload)
                .ok_or(OpError::MissingInput(kind)),
            _ => Err(OpError::MissingInput(kind)),
        }
    }

    fn run_node(&self, plan: &Plan, ws: &Workspace, id: NodeId, entry: &OpEntry) -> Result<OpOutput, OpError> {
        let params = self.effective_params(plan, id);
        let mut inputs = BTreeMap::new();
        for kind in &entry.inputs {
            inputs.insert(*kind, self.resolve_input(plan, ws, id, *kind, &params)?);
        }
        let implementation = entry.implementation.expect("only called for operations");
        let ctx = OpContext {
            node_id: id,
            params,
            inputs,
            seed: ws.seed,
            blobs: &ws.blobs,
            catalog: self.catalog,
            explanation_key: &entry.explanation,
        };
        implementation(&ctx)
    }

    fn record_output(&self, plan: &mut Plan, ws: &mut Workspace, id: NodeId, output: OpOutput) -> Vec<String> {
        let mut ids = Vec::new();
        let mut active_set = false;
        for a in output.artifacts {
            let hash = ws.blobs.put(a.bytes);
            let aid = ws.next_artifact_id();
            if output.sets_active_table && !active_set && a.provides == Some(DataKind::Table) {
                ws.active_table = Some(aid.clone());
                active_set = true;
            }
            ws.artifacts.push(Artifact {
                id: aid.clone(),
                kind: a.kind,
                node_id: Some(id),
                provides: a.provides,
                hash,
                media_type: a.media_type,
                title: a.title,
                explanation: a.explanation,
                plot_kind: a.plot_kind,
                meta: a.meta,
                visible: a.visible,
            });
            ids.push(aid);
        }
        plan.node_mut(id)
            .expect("node exists")
            .outputs
            .extend(ids.iter().cloned());
        ids
    }

    /// Runs ready work in topological order until the plan needs the user
    /// or nothing is left.
    pub fn step(&self, plan: &mut Plan, ws: &mut Workspace) -> Result<StepOutcome, ExecError> {
        let order = plan
            .topological_order()
            .map_err(|cycle| ExecError::InvalidPlan(format!("cycle through nodes {cycle:?}")))?;
        let mut outcome = StepOutcome::default();
        for id in order {
            let node = plan.node(id).expect("ordered ids exist").clone();
            match node.state {
                NodeState::AwaitingUser => {
                    outcome.awaiting = Some(id);
                    break;
                }
                NodeState::Pending => {
                    let preds = plan.predecessors(id);
                    let states: Vec<NodeState> = preds.iter().map(|p| plan.node(*p).expect("exists").state).collect();
                    if !states
                        .iter()
                        .all(|s| matches!(s, NodeState::Completed | NodeState::Skipped | NodeState::Failed))
                    {
                        continue;
                    }
                    if let Some(p) = preds
                        .iter()
                        .find(|p| plan.node(**p).expect("exists").state == NodeState::Failed)
                    {
                        set_state(
                            plan,
                            &mut ws.log,
                            self.clock,
                            id,
                            NodeState::Skipped,
                            format!("node {p} failed"),
                        );
                        outcome.skipped.push(id);
                        continue;
                    }
                    let resolvable = self
                        .registry
                        .get(&node.op_name)
                        .is_some_and(|e| e.implementation.is_some() || e.kind.is_interaction());
                    if !resolvable {
                        if node.optional {
                            set_state(
                                plan,
                                &mut ws.log,
                                self.clock,
                                id,
                                NodeState::Skipped,
                                format!("no implementation of `{}`", node.op_name),
                            );
                            outcome.skipped.push(id);
                            continue;
                        }
                        return Err(ExecError::Resolution {
                            node: id,
                            op_name: node.op_name.clone(),
                        });
                    }
                    set_state(
                        plan,
                        &mut ws.log,
                        self.clock,
                        id,
                        NodeState::Ready,
                        "inputs settled".into(),
                    );
                    if node.kind.is_interaction() {
                        set_state(
                            plan,
                            &mut ws.log,
                            self.clock,
                            id,
                            NodeState::AwaitingUser,
                            "asking the user".into(),
                        );
                        outcome.awaiting = Some(id);
                        break;
                    }
                    self.execute(plan, ws, id, &mut outcome);
                }
                NodeState::Ready => {
                    // A ready interaction node has been answered.
                    if self.registry.get(&node.op_name).is_none() {
                        return Err(ExecError::Resolution {
                            node: id,
                            op_name: node.op_name.clone(),
                        });
                    }
                    self.execute(plan, ws, id, &mut outcome);
                }
                _ => {}
            }
        }
        outcome.done = plan_done(plan);
        Ok(outcome)
    }

    fn execute(&self, plan: &mut Plan, ws: &mut Workspace, id: NodeId, outcome: &mut StepOutcome) {
        let node = plan.node(id).expect("exists").clone();
        let entry = self.registry.get(&node.op_name).expect("resolvability checked").clone();
        set_state(
            plan,
            &mut ws.log,
            self.clock,
            id,
            NodeState::Running,
            format!("running `{}`", entry.concrete),
        );
        plan.node_mut(id).expect("exists").resolved = Some(entry.concrete.clone());
        outcome.ran.push(id);
        if node.kind.is_interaction() {
            if node.kind == NodeKind::UserAction {
                if let Some(u) = upload_from_bound(&node.bound) {
                    ws.active_upload = Some(u);
                }
            }
            set_state(
                plan,
                &mut ws.log,
                self.clock,
                id,
                NodeState::Completed,
                "answered".into(),
            );
            return;
        }
        match self.run_node(plan, ws, id, &entry) {
            Ok(output) => {
                let ids = self.record_output(plan, ws, id, output);
                let detail = if ids.is_empty() {
                    "no artifacts".to_string()
                } else {
                    format!("produced {}", ids.join(", "))
                };
                outcome.new_artifacts.extend(ids);
                set_state(plan, &mut ws.log, self.clock, id, NodeState::Completed, detail);
            }
            Err(e) => {
                plan.node_mut(id).expect("exists").error = Some(e.to_string());
                set_state(plan, &mut ws.log, self.clock, id, NodeState::Failed, e.to_string());
                outcome.failed.push(NodeFailure {
                    node: id,
                    op_name: node.op_name.clone(),
                    error: e.to_string(),
                    remedy: e.remedy().map(str::to_string),
                });
                for d in plan.descendants(id) {
                    if plan.node(d).expect("exists").state == NodeState::Pending {
                        set_state(
                            plan,
                            &mut ws.log,
                            self.clock,
                            d,
                            NodeState::Skipped,
                            format!("node {id} failed"),
                        );
                        outcome.skipped.push(d);
                    }
                }
            }
        }
    }

    /// Binds a user's answer to an awaiting node.
    pub fn provide_user_input(
        &self,
        plan: &mut Plan,
        ws: &mut Workspace,
        id: NodeId,
        value: Value,
    ) -> Result<(), ExecError> {
        let node = plan.node(id).ok_or(ExecError::UnknownNode(id))?;
        if node.state != NodeState::AwaitingUser {
            return Err(ExecError::WrongState {
                node: id,
                state: node.state,
            });
        }
        let entry = self.registry.get(&node.op_name).ok_or_else(|| ExecError::Resolution {
            node: id,
            op_name: node.op_name.clone(),
        })?;
        let fields = match value {
            Value::Null => serde_json::Map::new(),
            Value::Object(map) => map,
            other => {
                return Err(ExecError::TypeMismatch {
                    node: id,
                    field: "(value)".into(),
                    expected: "an object".into(),
                    found: describe_value(&other),
                })
            }
        };
        for (name, v) in &fields {
            let spec = entry.contract.get(name).ok_or_else(|| ExecError::TypeMismatch {
                node: id,
                field: name.clone(),
                expected: "no such field".into(),
                found: describe_value(v),
            })?;
            if !spec.ty.admits(v) {
                return Err(ExecError::TypeMismatch {
                    node: id,
                    field: name.clone(),
                    expected: spec.ty.describe(),
                    found: describe_value(v),
                });
            }
        }
        if let Some((name, spec)) = entry
            .contract
            .iter()
            .find(|(n, s)| s.required && !fields.contains_key(*n))
        {
            return Err(ExecError::TypeMismatch {
                node: id,
                field: name.clone(),
                expected: spec.ty.describe(),
                found: "nothing".into(),
            });
        }
        let node = plan.node_mut(id).expect("checked");
        node.bound = fields.into_iter().collect();
        set_state(
            plan,
            &mut ws.log,
            self.clock,
            id,
            NodeState::Ready,
            "user answered".into(),
        );
        Ok(())
    }
}
