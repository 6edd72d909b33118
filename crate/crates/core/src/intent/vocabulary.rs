//! Controlled vocabulary: verbs, nouns and modifiers with their synonyms.
//!
//! The file is a JSON array of entries:
//!
//! ```json
//! {"lemma": "analyse", "word_class": "ActionVerb", "synonyms": ["analyze"],
//!  "action_class": "ExploreHandshake", "generic": true}
//! ```
//!
//! `action_class` is required on verbs and forbidden elsewhere. A `generic`
//! verb lets the first topic noun of the utterance refine its action.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ActionClass;

pub const DEFAULT_VOCABULARY: &str = include_str!("../../data/vocabulary.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordClass {
    ActionVerb,
    ObjectNoun,
    Modifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyEntry {
    pub lemma: String,
    pub word_class: WordClass,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_class: Option<ActionClass>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub generic: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VocabularyError {
    #[error("vocabulary schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("synonym `{word}` appears in both `{first}` and `{second}` ({class:?})")]
    Disjointness {
        word: String,
        class: WordClass,
        first: String,
        second: String,
    },
    #[error("cannot read vocabulary: {0}")]
    Io(String),
}

/// How a word matched an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchKind {
    Exact,
    Synonym,
    Fuzzy,
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<VocabularyEntry>,
    version: String,
    index: HashMap<(WordClass, String), (usize, MatchKind)>,
}

impl Vocabulary {
    pub fn default_shipped() -> Self {
        Vocabulary::from_json(DEFAULT_VOCABULARY).expect("shipped vocabulary is valid")
    }

    pub fn load(path: &Path) -> Result<Self, VocabularyError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| VocabularyError::Io(format!("{}: {e}", path.display())))?;
        Vocabulary::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, VocabularyError> {
        let entries: Vec<VocabularyEntry> = serde_json::from_str(text).map_err(|e| VocabularyError::Schema {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let version = {
            let digest = Sha256::digest(text.as_bytes());
            let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
            format!("vocab-{hex}")
        };
        Vocabulary::from_entries(entries, version)
    }

    pub fn from_entries(entries: Vec<VocabularyEntry>, version: String) -> Result<Self, VocabularyError> {
        let mut index = HashMap::new();
        let mut owner: BTreeMap<(WordClass, String), String> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let loc = |field: &str| format!("entry {i} (`{}`) field `{field}`", e.lemma);
            check_word(&e.lemma).map_err(|m| VocabularyError::Schema {
                location: loc("lemma"),
                message: m,
            })?;
            for s in &e.synonyms {
                check_word(s).map_err(|m| VocabularyError::Schema {
                    location: loc("synonyms"),
                    message: m,
                })?;
            }
            match (e.word_class, e.action_class) {
                (WordClass::ActionVerb, None) => {
                    return Err(VocabularyError::Schema {
                        location: loc("action_class"),
                        message: "verbs need an action_class".into(),
                    })
                }
                (WordClass::ObjectNoun | WordClass::Modifier, Some(_)) => {
                    return Err(VocabularyError::Schema {
                        location: loc("action_class"),
                        message: "only verbs carry an action_class".into(),
                    })
                }
                _ => {}
            }
            let words =
                std::iter::once((&e.lemma, MatchKind::Exact)).chain(e.synonyms.iter().map(|s| (s, MatchKind::Synonym)));
            for (w, kind) in words {
                let key = (e.word_class, w.clone());
                if let Some(first) = owner.get(&key) {
                    if first != &e.lemma || kind == MatchKind::Synonym {
                        return Err(VocabularyError::Disjointness {
                            word: w.clone(),
                            class: e.word_class,
                            first: first.clone(),
                            second: e.lemma.clone(),
                        });
                    }
                }
                owner.insert(key.clone(), e.lemma.clone());
                index.insert(key, (i, kind));
            }
        }
        Ok(Vocabulary {
            entries,
            version,
            index,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[VocabularyEntry] {
        &self.entries
    }

    pub fn entry(&self, class: WordClass, lemma: &str) -> Option<&VocabularyEntry> {
        self.entries.iter().find(|e| e.word_class == class && e.lemma == lemma)
    }

    pub fn count(&self, class: WordClass) -> usize {
        self.entries.iter().filter(|e| e.word_class == class).count()
    }

    /// Exact or synonym lookup.
    pub fn lookup(&self, class: WordClass, word: &str) -> Option<(&VocabularyEntry, MatchKind)> {
        self.index
            .get(&(class, word.to_string()))
            .map(|(i, k)| (&self.entries[*i], *k))
    }

    /// Whether `word` is any known lemma or synonym.
    pub fn knows(&self, word: &str) -> bool {
        [WordClass::ActionVerb, WordClass::ObjectNoun, WordClass::Modifier]
            .iter()
            .any(|c| self.index.contains_key(&(*c, word.to_string())))
    }

    /// Entry within edit distance 1 of `word` (words of 5+ characters only).
    /// Ties go to the earliest entry.
    pub fn fuzzy_lookup(&self, class: WordClass, word: &str) -> Option<&VocabularyEntry> {
        if word.chars().count() < 5 {
            return None;
        }
        self.entries.iter().filter(|e| e.word_class == class).find(|e| {
            std::iter::once(&e.lemma)
                .chain(&e.synonyms)
                .any(|w| w.chars().count() >= 4 && damerau_levenshtein(w, word) <= 1)
        })
    }
}

fn check_word(w: &str) -> Result<(), String> {
    if w.is_empty() {
        return Err("empty word".into());
    }
    if w.chars().any(char::is_whitespace) {
        return Err(format!("`{w}` contains whitespace"));
    }
    if w.chars().any(char::is_uppercase) {
        return Err(format!("`{w}` is not lowercase"));
    }
    Ok(())
}

/// Optimal-string-alignment distance (adjacent transpositions count as one edit).
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                d[i][j] = d[i][j].min(d[i - 2][j - 2] + 1);
            }
        }
    }
    d[n][m]
}
