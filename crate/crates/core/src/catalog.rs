//! Message catalog: keyed bot wordings with `{slot}` interpolation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_MESSAGES: &str = include_str!("../data/messages.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("message catalog schema error: {0}")]
    Schema(String),
    #[error("cannot read message catalog: {0}")]
    Io(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    messages: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct MessageCatalog {
    messages: BTreeMap<String, String>,
    version: String,
}

impl MessageCatalog {
    pub fn default_shipped() -> Self {
        MessageCatalog::from_json(DEFAULT_MESSAGES).expect("shipped catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io(format!("{}: {e}", path.display())))?;
        MessageCatalog::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| CatalogError::Schema(e.to_string()))?;
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        Ok(MessageCatalog {
            messages: file.messages,
            version: format!("msg-{hex}"),
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, key: &str) -> bool {
        self.messages.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.messages.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.messages.get(key).map(String::as_str)
    }

    /// Renders `key` with its slots filled. Unknown keys render as the key
    /// itself so a missing entry is visible rather than silent.
    pub fn render(&self, key: &str, vars: &BTreeMap<String, String>) -> String {
        match self.messages.get(key) {
            Some(template) => interpolate(template, vars),
            None => key.to_string(),
        }
    }

    pub fn text(&self, key: &str) -> String {
        self.render(key, &BTreeMap::new())
    }
}

/// Slot names used by a template, in order of appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) if after[..end].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && end > 0 => {
                out.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

pub fn interpolate(template: &str, vars: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) if vars.contains_key(&after[..end]) => {
                out.push_str(&vars[&after[..end]]);
                rest = &after[end + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Convenience for building slot maps.
pub fn vars<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_slots() {
        let c = MessageCatalog::default_shipped();
        assert_eq!(c.text("ask.request_upload"), "Please upload your data collection.");
        assert_eq!(c.text("ask.feedback"), "Are these results what you expected?");
        let s = c.render(
            "ask.sheet_choice",
            &vars([("count", "2".into()), ("names", "a, b".into())]),
        );
        assert_eq!(
            s,
            "Your file contains 2 sheets: a, b. Do you want me to transform all sheets?"
        );
        assert_eq!(c.text("no.such.key"), "no.such.key");
        assert!(c.version().starts_with("msg-"));
    }

    #[test]
    fn interpolation_edges() {
        let v = vars([("a", "1".into())]);
        assert_eq!(interpolate("{a}{b} {", &v), "1{b} {");
        assert_eq!(placeholders("x {a} {b_c} {} {d e}"), vec!["a", "b_c"]);
    }
}
