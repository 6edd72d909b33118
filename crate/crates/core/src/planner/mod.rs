//! Execution plans: per-action templates compiled into DAGs of operations,
//! bot requests and expected user actions.

mod templates;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::intent::{ActionClass, Intent};

pub use templates::{NodeTemplate, OpSignature, PlanTemplate, TemplateError, TemplateLibrary, When, DEFAULT_TEMPLATES};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    AbstractOp,
    ConcreteOp,
    BotRequest,
    UserAction,
}

impl NodeKind {
    pub fn is_interaction(self) -> bool {
        matches!(self, NodeKind::BotRequest | NodeKind::UserAction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeState {
    Pending,
    Ready,
    AwaitingUser,
    Running,
    Completed,
    Failed,
    Skipped,
}

impl NodeState {
    pub fn is_settled(self) -> bool {
        matches!(self, NodeState::Completed | NodeState::Skipped | NodeState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetaPattern {
    #[serde(rename = "P1_DataPreparation")]
    P1DataPreparation,
    #[serde(rename = "P2_AnalyticsTask")]
    P2AnalyticsTask,
    #[serde(rename = "P3_ActionRequest")]
    P3ActionRequest,
    #[serde(rename = "P4_BotRequestsInput")]
    P4BotRequestsInput,
    #[serde(rename = "P5_BotOffersOutput")]
    P5BotOffersOutput,
    #[serde(rename = "P6_Proactive")]
    P6Proactive,
}

impl MetaPattern {
    pub fn tag(self) -> &'static str {
        match self {
            MetaPattern::P1DataPreparation => "P1",
            MetaPattern::P2AnalyticsTask => "P2",
            MetaPattern::P3ActionRequest => "P3",
            MetaPattern::P4BotRequestsInput => "P4",
            MetaPattern::P5BotOffersOutput => "P5",
            MetaPattern::P6Proactive => "P6",
        }
    }
}

impl fmt::Display for MetaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// What flows along an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataKind {
    Upload,
    Table,
    NumericTable,
    Profile,
    Correlation,
    Pruning,
    Clusters,
    Plot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub op_name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    /// Values supplied by the user while the node was awaiting input.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bound: BTreeMap<String, Value>,
    pub state: NodeState,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Eligible to be skipped when no implementation resolves.
    #[serde(default)]
    pub optional: bool,
    pub pattern: MetaPattern,
    /// Template the node was instantiated from.
    pub template: String,
    /// Id of the first node of the same template instantiation.
    #[serde(default)]
    pub instance: NodeId,
    /// Concrete operation an abstract node resolved to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub nodes: Vec<PlanNode>,
    pub edges: Vec<Edge>,
    pub origin_pattern: MetaPattern,
    pub template_name: String,
    pub template_version: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no plan template for {action} {reason}")]
    NoTemplate { action: ActionClass, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DuplicateId {
        node: NodeId,
    },
    DanglingEdge {
        from: NodeId,
        to: NodeId,
    },
    Cycle {
        nodes: Vec<NodeId>,
    },
    UnsatisfiedInput {
        node: NodeId,
        input: DataKind,
    },
    UnknownOp {
        node: NodeId,
        op_name: String,
    },
    KindMismatch {
        node: NodeId,
        expected: NodeKind,
        found: NodeKind,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { node } => write!(f, "duplicate id: node {node}"),
            Violation::DanglingEdge { from, to } => write!(f, "dangling edge: {from} -> {to}"),
            Violation::Cycle { nodes } => write!(f, "cycle through nodes {nodes:?}"),
            Violation::UnsatisfiedInput { node, input } => {
                write!(f, "unsatisfied input: node {node} needs {input:?}")
            }
            Violation::UnknownOp { node, op_name } => write!(f, "unknown op: node {node} uses `{op_name}`"),
            Violation::KindMismatch { node, expected, found } => {
                write!(
                    f,
                    "kind mismatch: node {node} is {found:?}, signature says {expected:?}"
                )
            }
        }
    }
}

/// What the planner needs to know about the session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanContext {
    pub dataset_loaded: bool,
}

/// Parameter that lets a node read the session's active table when nothing
/// upstream in the plan produces one.
pub const TABLE_REF_PARAM: &str = "table_ref";
/// Same for the most recent upload.
pub const UPLOAD_REF_PARAM: &str = "upload_ref";
pub const ACTIVE_DATASET: &str = "active_dataset";
pub const ACTIVE_UPLOAD: &str = "active_upload";

/// The session-level fallback for an input nothing in the plan provides.
pub fn session_ref(kind: DataKind) -> Option<(&'static str, &'static str)> {
    match kind {
        DataKind::Table => Some((TABLE_REF_PARAM, ACTIVE_DATASET)),
        DataKind::Upload => Some((UPLOAD_REF_PARAM, ACTIVE_UPLOAD)),
        _ => None,
    }
}

impl Plan {
    pub fn node(&self, id: NodeId) -> Option<&PlanNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut PlanNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn next_id(&self) -> NodeId {
        self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0)
    }

    pub fn predecessors(&self, id: NodeId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.edges.iter().filter(|e| e.to == id).map(|e| e.from).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.edges.iter().filter(|e| e.from == id).map(|e| e.to).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Transitive predecessors, ascending.
    pub fn ancestors(&self, id: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = self.predecessors(id);
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.predecessors(n));
            }
        }
        seen
    }

    /// Transitive successors, ascending.
    pub fn descendants(&self, id: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = self.successors(id);
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.successors(n));
            }
        }
        seen
    }

    /// Kahn's algorithm; among ready nodes the smallest id goes first.
    /// Returns the nodes left on a cycle as the error.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, Vec<NodeId>> {
        let ids: BTreeSet<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let mut indegree: BTreeMap<NodeId, usize> = ids.iter().map(|&i| (i, 0)).collect();
        for e in &self.edges {
            if ids.contains(&e.from) {
                if let Some(d) = indegree.get_mut(&e.to) {
                    *d += 1;
                }
            }
        }
        let mut heap: BinaryHeap<Reverse<NodeId>> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(i, _)| Reverse(*i))
            .collect();
        let mut order = Vec::with_capacity(ids.len());
        while let Some(Reverse(n)) = heap.pop() {
            order.push(n);
            for e in self.edges.iter().filter(|e| e.from == n) {
                if let Some(d) = indegree.get_mut(&e.to) {
                    *d -= 1;
                    if *d == 0 {
                        heap.push(Reverse(e.to));
                    }
                }
            }
        }
        if order.len() == ids.len() {
            Ok(order)
        } else {
            let done: BTreeSet<NodeId> = order.into_iter().collect();
            Err(ids.difference(&done).copied().collect())
        }
    }

    /// Op names and edges of the nodes, the shape compared by plan metrics.
    pub fn op_names(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.op_name.as_str()).collect()
    }
}

impl TemplateLibrary {
    fn template_for(&self, action: ActionClass, context: &PlanContext) -> Result<&PlanTemplate, PlannerError> {
        let candidates: Vec<&PlanTemplate> = self.templates().iter().filter(|t| t.action == action).collect();
        if candidates.is_empty() {
            return Err(PlannerError::NoTemplate {
                action,
                reason: "(the dialogue handles it directly)".into(),
            });
        }
        candidates
            .into_iter()
            .find(|t| t.when.admits(context))
            .ok_or_else(|| PlannerError::NoTemplate {
                action,
                reason: if context.dataset_loaded {
                    "once a dataset is loaded".into()
                } else {
                    "before a dataset is loaded".into()
                },
            })
    }

    /// Instantiates a template with ids starting at `first_id`.
    fn instantiate(&self, template: &PlanTemplate, intent: &Intent, first_id: NodeId) -> (Vec<PlanNode>, Vec<Edge>) {
        let mut ids = BTreeMap::new();
        let mut nodes = Vec::new();
        for (offset, nt) in template.nodes.iter().enumerate() {
            let id = first_id + offset as NodeId;
            ids.insert(nt.key.clone(), id);
            let sig = self.signature(&nt.op).expect("templates are checked at load");
            let mut params = nt.params.clone();
            for (param, slot) in &nt.slots {
                if let Some(v) = slot_value(intent, slot) {
                    params.insert(param.clone(), v);
                }
            }
            nodes.push(PlanNode {
                id,
                kind: sig.kind,
                op_name: nt.op.clone(),
                params,
                bound: BTreeMap::new(),
                state: NodeState::Pending,
                outputs: Vec::new(),
                error: None,
                optional: nt.optional,
                pattern: nt.pattern.unwrap_or(template.pattern),
                template: template.name.clone(),
                instance: first_id,
                resolved: None,
            });
        }
        let edges = template
            .edges
            .iter()
            .map(|(a, b)| Edge {
                from: ids[a],
                to: ids[b],
            })
            .collect();
        (nodes, edges)
    }

    /// Nodes of a fresh instance whose table input nothing inside the instance provides.
    fn open_inputs(&self, nodes: &[PlanNode], edges: &[Edge]) -> Vec<(NodeId, DataKind)> {
        let sub = Plan {
            nodes: nodes.to_vec(),
            edges: edges.to_vec(),
            origin_pattern: MetaPattern::P1DataPreparation,
            template_name: String::new(),
            template_version: String::new(),
        };
        let mut open = Vec::new();
        for n in nodes {
            let Some(sig) = self.signature(&n.op_name) else {
                continue;
            };
            let ancestors = sub.ancestors(n.id);
            for input in &sig.inputs {
                let provided = ancestors.iter().any(|a| {
                    sub.node(*a)
                        .and_then(|an| self.signature(&an.op_name))
                        .is_some_and(|s| s.outputs.contains(input))
                });
                if !provided {
                    open.push((n.id, *input));
                }
            }
        }
        open
    }

    /// Builds a fresh plan for an intent.
    pub fn compile(&self, intent: &Intent, context: &PlanContext) -> Result<Plan, PlannerError> {
        let template = self.template_for(intent.action, context)?;
        let (mut nodes, edges) = self.instantiate(template, intent, 0);
        for (id, input) in self.open_inputs(&nodes, &edges) {
            if let Some((param, value)) = session_ref(input) {
                let node = nodes.iter_mut().find(|n| n.id == id).expect("own node");
                node.params.insert(param.into(), Value::String(value.into()));
            }
        }
        Ok(Plan {
            nodes,
            edges,
            origin_pattern: template.pattern,
            template_name: template.name.clone(),
            template_version: self.version().to_string(),
        })
    }

    /// Appends the template for a follow-up intent. Table inputs are wired to
    /// the latest completed node that produced a table, falling back to the
    /// first table producer and finally to the session's active dataset.
    /// Existing nodes and edges are untouched.
    pub fn merge_followup(&self, plan: &Plan, intent: &Intent, context: &PlanContext) -> Result<Plan, PlannerError> {
        let template = self.template_for(intent.action, context)?;
        let (mut nodes, mut edges) = self.instantiate(template, intent, plan.next_id());
        let producer = |kind: DataKind, completed_only: bool| {
            let ps = plan.nodes.iter().filter(|n| {
                self.signature(&n.op_name).is_some_and(|s| s.outputs.contains(&kind))
                    && (!completed_only || n.state == NodeState::Completed)
            });
            if completed_only {
                ps.max_by_key(|n| n.id).map(|n| n.id)
            } else {
                ps.min_by_key(|n| n.id).map(|n| n.id)
            }
        };
        for (id, input) in self.open_inputs(&nodes, &edges) {
            let source = producer(input, true).or_else(|| producer(input, false));
            match source {
                Some(from) => edges.push(Edge { from, to: id }),
                None => {
                    if let Some((param, value)) = session_ref(input) {
                        let node = nodes.iter_mut().find(|n| n.id == id).expect("own node");
                        node.params.insert(param.into(), Value::String(value.into()));
                    }
                }
            }
        }
        let mut merged = plan.clone();
        merged.nodes.extend(nodes);
        for e in edges {
            if !merged.edges.contains(&e) {
                merged.edges.push(e);
            }
        }
        Ok(merged)
    }

    /// Checks structure and data contracts; reports every violation found.
    pub fn validate(&self, plan: &Plan) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for n in &plan.nodes {
            if !seen.insert(n.id) {
                out.push(Violation::DuplicateId { node: n.id });
            }
        }
        for e in &plan.edges {
            if !seen.contains(&e.from) || !seen.contains(&e.to) {
                out.push(Violation::DanglingEdge { from: e.from, to: e.to });
            }
        }
        if let Err(nodes) = plan.topological_order() {
            out.push(Violation::Cycle { nodes });
        }
        for n in &plan.nodes {
            let Some(sig) = self.signature(&n.op_name) else {
                out.push(Violation::UnknownOp {
                    node: n.id,
                    op_name: n.op_name.clone(),
                });
                continue;
            };
            let abstract_ok = n.kind == NodeKind::ConcreteOp && sig.kind == NodeKind::AbstractOp;
            if n.kind != sig.kind && !abstract_ok {
                out.push(Violation::KindMismatch {
                    node: n.id,
                    expected: sig.kind,
                    found: n.kind,
                });
            }
            let ancestors = plan.ancestors(n.id);
            for input in &sig.inputs {
                let provided = ancestors.iter().any(|a| {
                    plan.node(*a)
                        .and_then(|an| self.signature(&an.op_name))
                        .is_some_and(|s| s.outputs.contains(input))
                });
                let by_ref = session_ref(*input).is_some_and(|(param, _)| n.params.contains_key(param));
                if !provided && !by_ref {
                    out.push(Violation::UnsatisfiedInput {
                        node: n.id,
                        input: *input,
                    });
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn slot_value(intent: &Intent, slot: &str) -> Option<Value> {
    let s = &intent.slots;
    match slot {
        "k_hint" => s.k_hint.map(Value::from),
        "threshold_hint" => s.threshold_hint.map(Value::from),
        "attribute_names" => (!s.attribute_names.is_empty()).then(|| Value::from(s.attribute_names.clone())),
        "sheet_selector" => s
            .sheet_selector
            .as_ref()
            .map(|sel| serde_json::to_value(sel).expect("serializable")),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::{Confidence, SheetSelector, Slots};

    fn intent(action: ActionClass) -> Intent {
        Intent {
            action,
            slots: Slots::default(),
            confidence: Confidence::Exact,
            matched_terms: Vec::new(),
        }
    }

    fn loaded() -> PlanContext {
        PlanContext { dataset_loaded: true }
    }

    #[test]
    fn handshake_plan_shape() {
        let lib = TemplateLibrary::default_shipped();
        let plan = lib
            .compile(&intent(ActionClass::ExploreHandshake), &PlanContext::default())
            .unwrap();
        assert_eq!(plan.nodes.len(), 5);
        assert_eq!(plan.edges.len(), 4);
        assert_eq!(plan.origin_pattern, MetaPattern::P1DataPreparation);
        let kinds: Vec<NodeKind> = plan.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            [
                NodeKind::BotRequest,
                NodeKind::UserAction,
                NodeKind::AbstractOp,
                NodeKind::BotRequest,
                NodeKind::AbstractOp
            ]
        );
        assert!(lib.validate(&plan).is_empty());
        assert_eq!(plan.topological_order().unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn cluster_k_hint_propagates() {
        let lib = TemplateLibrary::default_shipped();
        let mut i = intent(ActionClass::Cluster);
        i.slots.k_hint = Some(4);
        let plan = lib.compile(&i, &loaded()).unwrap();
        let cluster = plan.nodes.iter().find(|n| n.op_name == "cluster").unwrap();
        assert_eq!(cluster.params["k"], Value::from(4));
        let auto = lib.compile(&intent(ActionClass::Cluster), &loaded()).unwrap();
        let cluster = auto.nodes.iter().find(|n| n.op_name == "cluster").unwrap();
        assert!(!cluster.params.contains_key("k"));
        assert!(auto
            .nodes
            .iter()
            .any(|n| n.optional && n.op_name == "alternate_classifier"));
    }

    #[test]
    fn correlate_needs_a_dataset() {
        let lib = TemplateLibrary::default_shipped();
        let err = lib
            .compile(&intent(ActionClass::Correlate), &PlanContext::default())
            .unwrap_err();
        assert!(matches!(
            err,
            PlannerError::NoTemplate {
                action: ActionClass::Correlate,
                ..
            }
        ));
        assert!(lib.compile(&intent(ActionClass::Unknown), &loaded()).is_err());
    }

    #[test]
    fn every_template_validates_in_every_context() {
        let lib = TemplateLibrary::default_shipped();
        for action in ActionClass::ALL {
            for ctx in [PlanContext::default(), loaded()] {
                if let Ok(plan) = lib.compile(&intent(action), &ctx) {
                    assert_eq!(lib.validate(&plan), vec![], "{action} {ctx:?}");
                }
            }
        }
    }

    #[test]
    fn validate_reports_cycles_and_inputs() {
        let lib = TemplateLibrary::default_shipped();
        let mut plan = lib.compile(&intent(ActionClass::Correlate), &loaded()).unwrap();
        plan.edges.push(Edge { from: 1, to: 0 });
        let v = lib.validate(&plan);
        assert!(v.iter().any(|x| x.to_string().starts_with("cycle")), "{v:?}");

        let mut plan = lib.compile(&intent(ActionClass::Correlate), &loaded()).unwrap();
        plan.nodes[0].params.remove(TABLE_REF_PARAM);
        let v = lib.validate(&plan);
        assert_eq!(
            v,
            vec![Violation::UnsatisfiedInput {
                node: 0,
                input: DataKind::Table
            }]
        );
        assert!(v[0].to_string().starts_with("unsatisfied input"));

        plan.edges.push(Edge { from: 9, to: 0 });
        plan.nodes.push(plan.nodes[1].clone());
        let v = lib.validate(&plan);
        assert!(v.contains(&Violation::DanglingEdge { from: 9, to: 0 }));
        assert!(v.contains(&Violation::DuplicateId { node: 1 }));
    }

    #[test]
    fn merge_wires_to_latest_completed_table() {
        let lib = TemplateLibrary::default_shipped();
        let mut plan = lib
            .compile(&intent(ActionClass::ExploreHandshake), &PlanContext::default())
            .unwrap();
        for n in plan.nodes.iter_mut() {
            n.state = NodeState::Completed;
        }
        let before = plan.clone();
        let merged = lib
            .merge_followup(&plan, &intent(ActionClass::Correlate), &loaded())
            .unwrap();
        assert_eq!(&merged.nodes[..5], &before.nodes[..]);
        assert_eq!(&merged.edges[..4], &before.edges[..]);
        let nv = merged.nodes.iter().find(|n| n.op_name == "numeric_view").unwrap();
        assert_eq!(merged.predecessors(nv.id), vec![2]);
        assert!(!nv.params.contains_key(TABLE_REF_PARAM));
        assert!(lib.validate(&merged).is_empty());

        // exclusion produces a newer table, which the next request uses
        let mut ex = intent(ActionClass::ExcludeAttribute);
        ex.slots.attribute_names = vec!["a".into()];
        let mut merged = lib.merge_followup(&merged, &ex, &loaded()).unwrap();
        let ex_id = merged.nodes.last().unwrap().id;
        assert_eq!(
            merged.nodes.last().unwrap().params["attributes"],
            Value::from(vec!["a"])
        );
        merged.node_mut(ex_id).unwrap().state = NodeState::Completed;
        let merged = lib
            .merge_followup(&merged, &intent(ActionClass::Cluster), &loaded())
            .unwrap();
        let nv = merged.nodes.iter().rev().find(|n| n.op_name == "numeric_view").unwrap();
        assert_eq!(merged.predecessors(nv.id), vec![ex_id]);
        assert!(lib.validate(&merged).is_empty());
        let ids: BTreeSet<NodeId> = merged.nodes.iter().map(|n| n.id).collect();
        assert_eq!(ids.len(), merged.nodes.len());
    }

    #[test]
    fn merge_falls_back_to_ingested_table() {
        let lib = TemplateLibrary::default_shipped();
        let plan = lib
            .compile(&intent(ActionClass::ExploreHandshake), &PlanContext::default())
            .unwrap();
        let merged = lib
            .merge_followup(&plan, &intent(ActionClass::Correlate), &loaded())
            .unwrap();
        let nv = merged.nodes.iter().find(|n| n.op_name == "numeric_view").unwrap();
        assert_eq!(merged.predecessors(nv.id), vec![2]);

        let lone = lib.compile(&intent(ActionClass::Correlate), &loaded()).unwrap();
        let merged = lib
            .merge_followup(&lone, &intent(ActionClass::PlotRequest), &loaded())
            .unwrap();
        let hist_nv = merged.nodes.iter().rev().find(|n| n.op_name == "numeric_view").unwrap();
        assert_eq!(hist_nv.params[TABLE_REF_PARAM], Value::from(ACTIVE_DATASET));
        assert!(lib.validate(&merged).is_empty());
    }

    #[test]
    fn sheet_selector_becomes_param() {
        let lib = TemplateLibrary::default_shipped();
        let mut i = intent(ActionClass::TransformData);
        i.slots.sheet_selector = Some(SheetSelector::First);
        let plan = lib.compile(&i, &loaded()).unwrap();
        assert_eq!(plan.nodes[0].params["sheets"], Value::from("first"));
        i.slots.sheet_selector = Some(SheetSelector::Names(vec!["S2".into()]));
        let plan = lib.compile(&i, &loaded()).unwrap();
        assert_eq!(plan.nodes[0].params["sheets"], serde_json::json!({"names": ["S2"]}));
    }

    #[test]
    fn topological_tie_break_is_ascending_id() {
        let lib = TemplateLibrary::default_shipped();
        let mut plan = lib.compile(&intent(ActionClass::Correlate), &loaded()).unwrap();
        plan.edges.clear();
        plan.edges.push(Edge { from: 3, to: 0 });
        assert_eq!(plan.topological_order().unwrap(), vec![1, 2, 3, 0]);
    }

    #[test]
    fn plan_serde_round_trip() {
        let lib = TemplateLibrary::default_shipped();
        let plan = lib.compile(&intent(ActionClass::Cluster), &loaded()).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<Plan>(&json).unwrap(), plan);
        assert!(json.contains("\"P2_AnalyticsTask\""));
    }
}
