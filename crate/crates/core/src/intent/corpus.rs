//! Labeled utterance corpus for measuring intent accuracy.

use serde::{Deserialize, Serialize};

use super::{parse, ActionClass, SessionContext, Vocabulary};

pub const DEFAULT_INTENT_CORPUS: &str = include_str!("../../data/intent_corpus.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUtterance {
    pub utterance: String,
    pub expected: ActionClass,
    /// Reference phrasing that must always be recognized.
    #[serde(default)]
    pub verbatim: bool,
    #[serde(default)]
    pub context: SessionContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentCorpus {
    pub corpus_id: String,
    pub cases: Vec<LabeledUtterance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMiss {
    pub utterance: String,
    pub expected: ActionClass,
    pub got: ActionClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentAccuracy {
    pub total: usize,
    pub correct: usize,
    pub verbatim_total: usize,
    pub verbatim_correct: usize,
    pub misses: Vec<IntentMiss>,
}

impl IntentAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn verbatim_accuracy(&self) -> f64 {
        if self.verbatim_total == 0 {
            1.0
        } else {
            self.verbatim_correct as f64 / self.verbatim_total as f64
        }
    }
}

impl IntentCorpus {
    pub fn default_shipped() -> Self {
        serde_json::from_str(DEFAULT_INTENT_CORPUS).expect("shipped intent corpus is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn evaluate(&self, vocabulary: &Vocabulary) -> IntentAccuracy {
        let mut acc = IntentAccuracy {
            total: 0,
            correct: 0,
            verbatim_total: 0,
            verbatim_correct: 0,
            misses: Vec::new(),
        };
        for case in &self.cases {
            let got = parse(vocabulary, &case.utterance, &case.context).action;
            let hit = got == case.expected;
            acc.total += 1;
            acc.correct += usize::from(hit);
            if case.verbatim {
                acc.verbatim_total += 1;
                acc.verbatim_correct += usize::from(hit);
            }
            if !hit {
                acc.misses.push(IntentMiss {
                    utterance: case.utterance.clone(),
                    expected: case.expected,
                    got,
                });
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_corpus_shape() {
        let c = IntentCorpus::default_shipped();
        assert_eq!(c.cases.len(), 30);
        assert!(c.cases.iter().filter(|c| c.verbatim).count() >= 6);
    }

    #[test]
    fn shipped_corpus_accuracy() {
        let acc = IntentCorpus::default_shipped().evaluate(&Vocabulary::default_shipped());
        assert!(acc.accuracy() >= 0.9, "{:?}", acc.misses);
        assert_eq!(acc.verbatim_correct, acc.verbatim_total, "{:?}", acc.misses);
    }
}
