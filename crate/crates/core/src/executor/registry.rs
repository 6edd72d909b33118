//! Operation registry: op names resolved to implementations with contracts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::artifacts::{ArtifactKind, BlobStore, UploadRef};
use super::ops::{self, ProfileDoc};
use super::OpError;
use crate::catalog::MessageCatalog;
use crate::clustering::ClusterResult;
use crate::planner::{DataKind, NodeId, NodeKind, TemplateLibrary};
use crate::profiler::{CorrelationMatrix, PruningResult};
use crate::storyteller::PlotKind;
use crate::tabular::Table;

/// Accepted JSON shape of one field a user supplies to an interaction node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum FieldType {
    Text,
    Number,
    Bool,
    Choice(Vec<String>),
    Any,
}

impl FieldType {
    pub fn admits(&self, value: &Value) -> bool {
        match self {
            FieldType::Text => value.is_string(),
            FieldType::Number => value.is_number(),
            FieldType::Bool => value.is_boolean(),
            FieldType::Choice(options) => value.as_str().is_some_and(|s| options.iter().any(|o| o == s)),
            FieldType::Any => true,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FieldType::Text => "text".into(),
            FieldType::Number => "a number".into(),
            FieldType::Bool => "true or false".into(),
            FieldType::Choice(options) => format!("one of {}", options.join(", ")),
            FieldType::Any => "any value".into(),
        }
    }
}

pub fn describe_value(value: &Value) -> String {
    match value {
        Value::Null => "null".into(),
        Value::Bool(_) => "a boolean".into(),
        Value::Number(_) => "a number".into(),
        Value::String(s) => format!("text \"{s}\""),
        Value::Array(_) => "a list".into(),
        Value::Object(_) => "an object".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub ty: FieldType,
    pub required: bool,
}

pub type InputContract = BTreeMap<String, FieldSpec>;

/// A value flowing into an operation.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Upload(UploadRef),
    Table(Table),
    Profile(ProfileDoc),
    Correlation(CorrelationMatrix),
    Pruning(PruningResult),
    Clusters(ClusterResult),
}

pub struct OpContext<'a> {
    pub node_id: NodeId,
    /// Signature defaults, then answers bound upstream, then node params.
    pub params: BTreeMap<String, Value>,
    pub inputs: BTreeMap<DataKind, Datum>,
    pub seed: u64,
    pub blobs: &'a BlobStore,
    pub catalog: &'a MessageCatalog,
    /// The entry's explanation template key.
    pub explanation_key: &'a str,
}

impl OpContext<'_> {
    pub fn table(&self, kind: DataKind) -> Result<&Table, OpError> {
        match self.inputs.get(&kind) {
            Some(Datum::Table(t)) => Ok(t),
            _ => Err(OpError::MissingInput(kind)),
        }
    }

    pub fn upload(&self) -> Result<&UploadRef, OpError> {
        match self.inputs.get(&DataKind::Upload) {
            Some(Datum::Upload(u)) => Ok(u),
            _ => Err(OpError::MissingInput(DataKind::Upload)),
        }
    }

    pub fn correlation(&self) -> Result<&CorrelationMatrix, OpError> {
        match self.inputs.get(&DataKind::Correlation) {
            Some(Datum::Correlation(c)) => Ok(c),
            _ => Err(OpError::MissingInput(DataKind::Correlation)),
        }
    }

    pub fn clusters(&self) -> Result<&ClusterResult, OpError> {
        match self.inputs.get(&DataKind::Clusters) {
            Some(Datum::Clusters(c)) => Ok(c),
            _ => Err(OpError::MissingInput(DataKind::Clusters)),
        }
    }

    pub fn param(&self, name: &str) -> Option<&Value> {
        self.params.get(name).filter(|v| !v.is_null())
    }

    pub fn f64_param(&self, name: &str) -> Result<Option<f64>, OpError> {
        match self.param(name) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| OpError::Param {
                name: name.into(),
                message: format!("expected a number, got {}", describe_value(v)),
            }),
        }
    }

    pub fn usize_param(&self, name: &str) -> Result<Option<usize>, OpError> {
        match self.param(name) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
                .map(|n| Some(n as usize))
                .ok_or_else(|| OpError::Param {
                    name: name.into(),
                    message: format!("expected a whole number, got {}", describe_value(v)),
                }),
        }
    }

    pub fn explain(&self, vars: &BTreeMap<String, String>) -> String {
        self.catalog.render(self.explanation_key, vars)
    }
}

/// An artifact an operation wants recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct NewArtifact {
    pub kind: ArtifactKind,
    pub provides: Option<DataKind>,
    pub bytes: Vec<u8>,
    pub media_type: String,
    pub title: String,
    pub explanation: String,
    pub plot_kind: Option<PlotKind>,
    pub meta: Value,
    /// Intermediate results are recorded but not shown as turns.
    pub visible: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpOutput {
    pub artifacts: Vec<NewArtifact>,
    /// The first table artifact becomes the session's active dataset.
    pub sets_active_table: bool,
}

pub type OpFn = fn(&OpContext<'_>) -> Result<OpOutput, OpError>;

#[derive(Clone)]
pub struct OpEntry {
    pub op_name: String,
    /// Name of the implementation an abstract op resolves to.
    pub concrete: String,
    pub kind: NodeKind,
    pub inputs: Vec<DataKind>,
    pub outputs: Vec<DataKind>,
    pub defaults: BTreeMap<String, Value>,
    /// Fields accepted from the user (interaction nodes only).
    pub contract: InputContract,
    /// Catalog key of the explanation template.
    pub explanation: String,
    pub implementation: Option<OpFn>,
}

impl std::fmt::Debug for OpEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpEntry")
            .field("op_name", &self.op_name)
            .field("concrete", &self.concrete)
            .field("kind", &self.kind)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .finish()
    }
}

/// Immutable after construction; shared by every session.
#[derive(Debug, Clone, Default)]
pub struct OperationRegistry {
    entries: BTreeMap<String, OpEntry>,
}

fn field(ty: FieldType, required: bool) -> FieldSpec {
    FieldSpec { ty, required }
}

fn interaction_contract(op: &str) -> Option<InputContract> {
    let choice = |v: &[&str]| FieldType::Choice(v.iter().map(|s| s.to_string()).collect());
    let mut c = InputContract::new();
    match op {
        "request_upload" => {}
        "upload_dataset" => {
            c.insert("blob".into(), field(FieldType::Text, true));
            c.insert("filename".into(), field(FieldType::Text, true));
            c.insert("size".into(), field(FieldType::Number, true));
            c.insert("sheets".into(), field(FieldType::Any, false));
        }
        "choose_description" => {
            c.insert("mode".into(), field(choice(&["statistical", "structural"]), true));
        }
        "feedback" => {
            c.insert("rating".into(), field(choice(&["like", "dislike"]), false));
            c.insert("turn".into(), field(FieldType::Number, false));
        }
        _ => return None,
    }
    Some(c)
}

impl OperationRegistry {
    /// Every op of the template library with a built-in implementation.
    pub fn standard(library: &TemplateLibrary) -> Self {
        let mut registry = OperationRegistry::default();
        for (name, sig) in library.signatures() {
            let (concrete, implementation, contract) = if sig.kind.is_interaction() {
                match interaction_contract(name) {
                    Some(c) => (name.clone(), None, c),
                    None => continue,
                }
            } else {
                match ops::builtin(name) {
                    Some((concrete, f)) => (concrete.to_string(), Some(f), InputContract::new()),
                    None => continue,
                }
            };
            registry.insert(OpEntry {
                op_name: name.clone(),
                concrete,
                kind: sig.kind,
                inputs: sig.inputs.clone(),
                outputs: sig.outputs.clone(),
                defaults: sig.defaults.clone(),
                contract,
                explanation: format!("explain.{name}"),
                implementation,
            });
        }
        registry
    }

    pub fn insert(&mut self, entry: OpEntry) {
        self.entries.insert(entry.op_name.clone(), entry);
    }

    pub fn remove(&mut self, op_name: &str) -> Option<OpEntry> {
        self.entries.remove(op_name)
    }

    pub fn get(&self, op_name: &str) -> Option<&OpEntry> {
        self.entries.get(op_name)
    }

    pub fn contains(&self, op_name: &str) -> bool {
        self.entries.contains_key(op_name)
    }

    pub fn entries(&self) -> impl Iterator<Item = &OpEntry> {
        self.entries.values()
    }

    /// Problems between the registry and a template library: non-optional
    /// template nodes that do not resolve, and contracts that disagree.
    pub fn check_against(&self, library: &TemplateLibrary) -> Vec<String> {
        let mut problems = Vec::new();
        for t in library.templates() {
            for n in &t.nodes {
                match self.get(&n.op) {
                    None if n.optional => {}
                    None => problems.push(format!("{}/{}: `{}` does not resolve", t.name, n.key, n.op)),
                    Some(entry) => {
                        let sig = library.signature(&n.op).expect("checked at load");
                        if entry.inputs != sig.inputs || entry.outputs != sig.outputs || entry.kind != sig.kind {
                            problems.push(format!("{}/{}: contract of `{}` disagrees", t.name, n.key, n.op));
                        }
                    }
                }
            }
        }
        problems
    }
}
