//! Plan template file: op signatures plus one node/edge pattern per action.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{DataKind, MetaPattern, NodeKind, PlanContext};
use crate::intent::ActionClass;

pub const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSignature {
    pub kind: NodeKind,
    pub inputs: Vec<DataKind>,
    pub outputs: Vec<DataKind>,
    /// Parameter values assumed when a node leaves them unset.
    #[serde(default)]
    pub defaults: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum When {
    Always,
    NoDataset,
    DatasetLoaded,
}

impl When {
    pub fn admits(self, context: &PlanContext) -> bool {
        match self {
            When::Always => true,
            When::NoDataset => !context.dataset_loaded,
            When::DatasetLoaded => context.dataset_loaded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeTemplate {
    pub key: String,
    pub op: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    /// param name -> intent slot that fills it
    #[serde(default)]
    pub slots: BTreeMap<String, String>,
    #[serde(default)]
    pub optional: bool,
    #[serde(default)]
    pub pattern: Option<MetaPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanTemplate {
    pub name: String,
    pub action: ActionClass,
    #[serde(default = "always")]
    pub when: When,
    pub pattern: MetaPattern,
    pub nodes: Vec<NodeTemplate>,
    pub edges: Vec<(String, String)>,
}

fn always() -> When {
    When::Always
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    signatures: BTreeMap<String, OpSignature>,
    templates: Vec<PlanTemplate>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template file schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("template `{template}`: {message}")]
    Invalid { template: String, message: String },
    #[error("cannot read template file: {0}")]
    Io(String),
}

const KNOWN_SLOTS: [&str; 4] = ["k_hint", "threshold_hint", "attribute_names", "sheet_selector"];

#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    signatures: BTreeMap<String, OpSignature>,
    templates: Vec<PlanTemplate>,
    version: String,
}

impl TemplateLibrary {
    pub fn default_shipped() -> Self {
        TemplateLibrary::from_json(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
        TemplateLibrary::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = serde_json::from_str(text).map_err(|e| TemplateError::Schema {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        let lib = TemplateLibrary {
            signatures: file.signatures,
            templates: file.templates,
            version: format!("tmpl-{hex}"),
        };
        lib.check()?;
        Ok(lib)
    }

    fn check(&self) -> Result<(), TemplateError> {
        let mut names = BTreeSet::new();
        for t in &self.templates {
            let fail = |message: String| TemplateError::Invalid {
                template: t.name.clone(),
                message,
            };
            if !names.insert(&t.name) {
                return Err(fail("duplicate template name".into()));
            }
            if t.nodes.is_empty() {
                return Err(fail("no nodes".into()));
            }
            let mut keys = BTreeSet::new();
            for n in &t.nodes {
                if !keys.insert(&n.key) {
                    return Err(fail(format!("duplicate node key `{}`", n.key)));
                }
                if !self.signatures.contains_key(&n.op) {
                    return Err(fail(format!("node `{}` uses op `{}` with no signature", n.key, n.op)));
                }
                if let Some(bad) = n.slots.values().find(|s| !KNOWN_SLOTS.contains(&s.as_str())) {
                    return Err(fail(format!("node `{}` reads unknown slot `{bad}`", n.key)));
                }
            }
            for (a, b) in &t.edges {
                if !keys.contains(a) || !keys.contains(b) {
                    return Err(fail(format!("edge {a} -> {b} names an unknown node")));
                }
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn templates(&self) -> &[PlanTemplate] {
        &self.templates
    }

    pub fn template(&self, name: &str) -> Option<&PlanTemplate> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn signature(&self, op: &str) -> Option<&OpSignature> {
        self.signatures.get(op)
    }

    pub fn signatures(&self) -> &BTreeMap<String, OpSignature> {
        &self.signatures
    }

    /// Params with the signature defaults filled in.
    pub fn normalized_params(&self, op: &str, params: &BTreeMap<String, Value>) -> BTreeMap<String, Value> {
        let mut out = self.signature(op).map(|s| s.defaults.clone()).unwrap_or_default();
        for (k, v) in params {
            out.insert(k.clone(), v.clone());
        }
        out
    }
}
