//! Rule-based intent recognition over a controlled vocabulary.
//!
//! The first action verb of an utterance picks the action. Generic verbs
//! ("show", "analyse", ...) are refined by the first topic noun, so
//! "show the correlation" becomes [`ActionClass::Correlate`]. Slots are filled
//! from modifiers, numbers, quoted strings and the loaded column names.

mod corpus;
mod tokenize;
mod vocabulary;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use corpus::{IntentAccuracy, IntentCorpus, IntentMiss, LabeledUtterance, DEFAULT_INTENT_CORPUS};
pub use tokenize::{tokenize, Token};
pub use vocabulary::{
    damerau_levenshtein, MatchKind, Vocabulary, VocabularyEntry, VocabularyError, WordClass, DEFAULT_VOCABULARY,
};

use tokenize::{lex, normalize, Lexeme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionClass {
    ExploreHandshake,
    TransformData,
    DescribeStructural,
    DescribeStatistical,
    Correlate,
    Cluster,
    PlotRequest,
    ExcludeAttribute,
    SelectSheet,
    AcceptSuggestion,
    RejectSuggestion,
    ProvideFeedback,
    PauseSession,
    ResumeSession,
    EndSession,
    Unknown,
}

impl ActionClass {
    pub const ALL: [ActionClass; 16] = [
        ActionClass::ExploreHandshake,
        ActionClass::TransformData,
        ActionClass::DescribeStructural,
        ActionClass::DescribeStatistical,
        ActionClass::Correlate,
        ActionClass::Cluster,
        ActionClass::PlotRequest,
        ActionClass::ExcludeAttribute,
        ActionClass::SelectSheet,
        ActionClass::AcceptSuggestion,
        ActionClass::RejectSuggestion,
        ActionClass::ProvideFeedback,
        ActionClass::PauseSession,
        ActionClass::ResumeSession,
        ActionClass::EndSession,
        ActionClass::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionClass::ExploreHandshake => "ExploreHandshake",
            ActionClass::TransformData => "TransformData",
            ActionClass::DescribeStructural => "DescribeStructural",
            ActionClass::DescribeStatistical => "DescribeStatistical",
            ActionClass::Correlate => "Correlate",
            ActionClass::Cluster => "Cluster",
            ActionClass::PlotRequest => "PlotRequest",
            ActionClass::ExcludeAttribute => "ExcludeAttribute",
            ActionClass::SelectSheet => "SelectSheet",
            ActionClass::AcceptSuggestion => "AcceptSuggestion",
            ActionClass::RejectSuggestion => "RejectSuggestion",
            ActionClass::ProvideFeedback => "ProvideFeedback",
            ActionClass::PauseSession => "PauseSession",
            ActionClass::ResumeSession => "ResumeSession",
            ActionClass::EndSession => "EndSession",
            ActionClass::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Like,
    Dislike,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheetSelector {
    All,
    First,
    Names(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Slots {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attribute_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sheet_selector: Option<SheetSelector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hint: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_hint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<Rating>,
}

impl Slots {
    pub fn is_empty(&self) -> bool {
        self == &Slots::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confidence {
    Exact,
    Synonym,
    Fuzzy,
}

impl From<MatchKind> for Confidence {
    fn from(k: MatchKind) -> Self {
        match k {
            MatchKind::Exact => Confidence::Exact,
            MatchKind::Synonym => Confidence::Synonym,
            MatchKind::Fuzzy => Confidence::Fuzzy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub action: ActionClass,
    pub slots: Slots,
    pub confidence: Confidence,
    /// (surface token, lemma) for every vocabulary word that was used.
    pub matched_terms: Vec<(String, String)>,
}

impl Intent {
    fn unknown() -> Self {
        Intent::from_action(ActionClass::Unknown)
    }

    /// An intent with no slots, for requests that do not come from text.
    pub fn from_action(action: ActionClass) -> Self {
        Intent {
            action,
            slots: Slots::default(),
            confidence: Confidence::Exact,
            matched_terms: Vec::new(),
        }
    }
}

/// The question the bot is currently waiting on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PendingKind {
    Upload,
    SheetChoice,
    DescriptionChoice,
    Feedback,
    Suggestion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionContext {
    pub pending: Option<PendingKind>,
    pub dataset_loaded: bool,
    pub columns: Vec<String>,
    pub sheet_names: Vec<String>,
}

/// Topic nouns (and descriptive modifiers) that refine a generic verb.
const REFINEMENTS: &[(WordClass, &str, ActionClass)] = &[
    (WordClass::ObjectNoun, "correlation", ActionClass::Correlate),
    (WordClass::ObjectNoun, "cluster", ActionClass::Cluster),
    (WordClass::ObjectNoun, "plot", ActionClass::PlotRequest),
    (WordClass::ObjectNoun, "statistics", ActionClass::DescribeStatistical),
    (WordClass::ObjectNoun, "structure", ActionClass::DescribeStructural),
    (WordClass::ObjectNoun, "sheet", ActionClass::SelectSheet),
    (WordClass::ObjectNoun, "story", ActionClass::EndSession),
    (WordClass::Modifier, "statistical", ActionClass::DescribeStatistical),
    (WordClass::Modifier, "structural", ActionClass::DescribeStructural),
];

const NEGATIONS: &[&str] = &["not", "no", "don", "doesn", "didn", "never", "dont", "isn", "wasn"];

/// Frequent function words kept out of fuzzy matching.
const FUZZY_STOPWORDS: &[&str] = &[
    "where", "there", "these", "those", "which", "while", "about", "would", "could", "should", "their", "other",
    "thing", "think", "might", "after", "again", "thanks", "please", "hello", "further",
];

/// Surface forms to try for a word: itself, then simple inflection stems.
fn verb_candidates(word: &str) -> Vec<String> {
    let mut out = vec![word.to_string()];
    let mut push = |s: String| {
        if s.len() >= 2 && !out.contains(&s) {
            out.push(s);
        }
    };
    let undouble = |stem: &str| {
        let b = stem.as_bytes();
        (b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2]).then(|| stem[..stem.len() - 1].to_string())
    };
    if let Some(stem) = word.strip_suffix("ing") {
        push(stem.to_string());
        push(format!("{stem}e"));
        if let Some(s) = undouble(stem) {
            push(s);
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        push(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("ies") {
        push(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("ed") {
        push(stem.to_string());
        push(format!("{stem}e"));
        if let Some(s) = undouble(stem) {
            push(s);
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        push(stem.to_string());
    }
    if let Some(stem) = word.strip_suffix('s') {
        push(stem.to_string());
    }
    out
}

struct Word<'a> {
    raw: &'a str,
    norm: String,
}

pub struct IntentParser<'v> {
    vocabulary: &'v Vocabulary,
}

impl<'v> IntentParser<'v> {
    pub fn new(vocabulary: &'v Vocabulary) -> Self {
        IntentParser { vocabulary }
    }

    pub fn parse(&self, utterance: &str, context: &SessionContext) -> Intent {
        parse(self.vocabulary, utterance, context)
    }
}

fn find_verb<'a>(vocabulary: &'a Vocabulary, words: &[Word<'_>]) -> Option<(usize, &'a VocabularyEntry, MatchKind)> {
    for (i, w) in words.iter().enumerate() {
        for cand in verb_candidates(&w.norm) {
            if let Some((entry, kind)) = vocabulary.lookup(WordClass::ActionVerb, &cand) {
                // "would like to explore" is not feedback
                let followed_by_to = words.get(i + 1).is_some_and(|n| n.norm == "to");
                if entry.action_class == Some(ActionClass::ProvideFeedback) && followed_by_to {
                    break;
                }
                return Some((i, entry, kind));
            }
        }
    }
    for (i, w) in words.iter().enumerate() {
        if FUZZY_STOPWORDS.contains(&w.norm.as_str()) || vocabulary.knows(&w.norm) {
            continue;
        }
        if let Some(entry) = vocabulary.fuzzy_lookup(WordClass::ActionVerb, &w.norm) {
            return Some((i, entry, MatchKind::Fuzzy));
        }
    }
    None
}

fn lemma_of<'a>(vocabulary: &'a Vocabulary, class: WordClass, word: &Word<'_>) -> Option<&'a VocabularyEntry> {
    vocabulary.lookup(class, &word.norm).map(|(e, _)| e)
}

/// Position of the first mention of `name`, either quoted or as a contiguous
/// run of words.
fn mentions(lexemes: &[Lexeme], name: &str) -> Option<usize> {
    let lowered = name.to_lowercase();
    let quoted = lexemes
        .iter()
        .position(|l| matches!(l.token, Token::Quoted(_)) && l.raw == lowered);
    if quoted.is_some() {
        return quoted;
    }
    let parts: Vec<String> = lex(name).into_iter().map(|l| l.raw).collect();
    if parts.is_empty() || parts.len() > lexemes.len() {
        return None;
    }
    (0..=lexemes.len() - parts.len()).find(|&s| {
        parts
            .iter()
            .enumerate()
            .all(|(k, p)| !matches!(lexemes[s + k].token, Token::Quoted(_)) && lexemes[s + k].raw == *p)
    })
}

fn mentioned_in_order(lexemes: &[Lexeme], names: &[String]) -> Vec<String> {
    let mut hits: Vec<(usize, usize, &String)> = names
        .iter()
        .enumerate()
        .filter_map(|(i, n)| mentions(lexemes, n).map(|pos| (pos, i, n)))
        .collect();
    hits.sort();
    hits.into_iter().map(|(_, _, n)| n.clone()).collect()
}

/// The first topic noun, else the first descriptive modifier, with the action it implies.
fn refinement<'w, 'a>(
    vocabulary: &Vocabulary,
    words: &'w [Word<'a>],
) -> Option<(&'w Word<'a>, &'static str, ActionClass)> {
    [WordClass::ObjectNoun, WordClass::Modifier]
        .into_iter()
        .find_map(|class| {
            words.iter().find_map(|w| {
                let entry = lemma_of(vocabulary, class, w)?;
                REFINEMENTS
                    .iter()
                    .find(|(c, lemma, _)| *c == class && *lemma == entry.lemma)
                    .map(|(_, lemma, target)| (w, *lemma, *target))
            })
        })
}

/// Parses one utterance. Total and deterministic: every input yields one intent.
pub fn parse(vocabulary: &Vocabulary, utterance: &str, context: &SessionContext) -> Intent {
    let lexemes: Vec<Lexeme> = lex(utterance);
    let mut words = Vec::new();
    let mut numbers = Vec::new();
    for l in &lexemes {
        match &l.token {
            Token::Word(w) => words.push(Word {
                raw: &l.raw,
                norm: normalize(w, vocabulary),
            }),
            Token::Number(n) => numbers.push(*n),
            Token::Quoted(_) => {}
        }
    }

    let modifier = |lemma: &str| {
        words
            .iter()
            .find(|w| lemma_of(vocabulary, WordClass::Modifier, w).is_some_and(|e| e.lemma == lemma))
    };
    let mut matched_terms: Vec<(String, String)> = Vec::new();
    let mut note = |w: &Word<'_>, lemma: &str| matched_terms.push((w.raw.to_string(), lemma.to_string()));
    let sheet_mentioned = !mentioned_in_order(&lexemes, &context.sheet_names).is_empty();
    let verb = find_verb(vocabulary, &words);
    let pending = context.pending;

    let polar = modifier("good").or_else(|| modifier("bad"));
    let (action, confidence) = if let (Some(PendingKind::Feedback), Some(w)) = (pending, polar) {
        // "not useful" answers the feedback question even if a verb appears
        note(
            w,
            &vocabulary
                .lookup(WordClass::Modifier, &w.norm)
                .map(|(e, _)| e.lemma.clone())
                .unwrap_or_default(),
        );
        (ActionClass::ProvideFeedback, Confidence::Exact)
    } else if let Some((vi, entry, kind)) = verb {
        note(&words[vi], &entry.lemma);
        let mut action = entry.action_class.unwrap_or(ActionClass::Unknown);
        if entry.generic {
            if let Some((w, lemma, target)) = refinement(vocabulary, &words) {
                note(w, lemma);
                action = target;
            }
        }
        (action, Confidence::from(kind))
    } else {
        // Answers to a pending question need no verb.
        let answer = match pending {
            Some(PendingKind::DescriptionChoice) if modifier("statistical").is_some() => {
                Some(("statistical", ActionClass::DescribeStatistical))
            }
            Some(PendingKind::DescriptionChoice) if modifier("structural").is_some() => {
                Some(("structural", ActionClass::DescribeStructural))
            }
            Some(PendingKind::SheetChoice)
                if modifier("first").is_some() || modifier("all").is_some() || sheet_mentioned =>
            {
                Some(("", ActionClass::TransformData))
            }
            Some(_) if modifier("no").is_some() => Some(("no", ActionClass::RejectSuggestion)),
            Some(_) if modifier("yes").is_some() => Some(("yes", ActionClass::AcceptSuggestion)),
            _ => None,
        };
        if let Some((lemma, action)) = answer {
            if let Some(w) = (!lemma.is_empty()).then(|| modifier(lemma)).flatten() {
                note(w, lemma);
            }
            (action, Confidence::Exact)
        } else if let Some((w, lemma, target)) =
            refinement(vocabulary, &words).filter(|(w, _, _)| lemma_of(vocabulary, WordClass::ObjectNoun, w).is_some())
        {
            // a bare topic noun ("histograms please") is a request on its own
            note(w, lemma);
            (target, Confidence::Exact)
        } else {
            return Intent::unknown();
        }
    };

    let mut slots = Slots::default();
    if context.dataset_loaded || !context.columns.is_empty() {
        slots.attribute_names = mentioned_in_order(&lexemes, &context.columns);
    }

    let sheet_context = matches!(action, ActionClass::TransformData | ActionClass::SelectSheet)
        || pending == Some(PendingKind::SheetChoice);
    if sheet_context {
        let names = mentioned_in_order(&lexemes, &context.sheet_names);
        slots.sheet_selector = if !names.is_empty() {
            Some(SheetSelector::Names(names))
        } else if let Some(w) = modifier("first") {
            note(w, "first");
            Some(SheetSelector::First)
        } else if let Some(w) = modifier("all") {
            note(w, "all");
            Some(SheetSelector::All)
        } else {
            None
        };
    }

    slots.threshold_hint = numbers.iter().copied().find(|n| *n > 0.0 && *n < 1.0);
    if action == ActionClass::Cluster {
        slots.k_hint = numbers
            .iter()
            .copied()
            .find(|n| n.fract() == 0.0 && *n >= 1.0 && *n <= 1000.0)
            .map(|n| n as usize);
    }

    if action == ActionClass::ProvideFeedback {
        let verb_at = verb.map(|(vi, entry, _)| (vi, entry.lemma.as_str()));
        slots.rating = words.iter().enumerate().find_map(|(i, w)| {
            let lemma = match verb_at {
                Some((vi, lemma)) if vi == i => Some(lemma),
                _ => lemma_of(vocabulary, WordClass::Modifier, w).map(|e| e.lemma.as_str()),
            };
            let base = match lemma {
                Some("like" | "good") => Rating::Like,
                Some("dislike" | "bad") => Rating::Dislike,
                _ => return None,
            };
            let negated = words[i.saturating_sub(2)..i]
                .iter()
                .any(|p| NEGATIONS.contains(&p.norm.as_str()));
            Some(match (base, negated) {
                (r, false) => r,
                (Rating::Like, true) => Rating::Dislike,
                (Rating::Dislike, true) => Rating::Like,
            })
        });
    }

    Intent {
        action,
        slots,
        confidence,
        matched_terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(text: &str) -> Intent {
        parse(&Vocabulary::default_shipped(), text, &SessionContext::default())
    }

    fn loaded(columns: &[&str]) -> SessionContext {
        SessionContext {
            dataset_loaded: true,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..SessionContext::default()
        }
    }

    #[test]
    fn handshake_phrasings() {
        for text in [
            "Help me to analyse my data",
            "I want to explore a data collection?",
            "I need help exploring the following data collection",
        ] {
            assert_eq!(p(text).action, ActionClass::ExploreHandshake, "{text}");
        }
    }

    #[test]
    fn understand_maps_to_cluster() {
        assert_eq!(p("I want to understand the data further.").action, ActionClass::Cluster);
        assert_eq!(
            p("I want to understand the dataset's content further").action,
            ActionClass::Cluster
        );
    }

    #[test]
    fn transform_first_sheet() {
        let i = p("Transform only the first sheet.");
        assert_eq!(i.action, ActionClass::TransformData);
        assert_eq!(i.slots.sheet_selector, Some(SheetSelector::First));
        assert_eq!(i.confidence, Confidence::Exact);
    }

    #[test]
    fn generic_verb_refined_by_topic() {
        let i = p("Analyse the linear correlation between each couple of numerical attributes in the dataset");
        assert_eq!(i.action, ActionClass::Correlate);
        assert!(i.matched_terms.contains(&("correlation".into(), "correlation".into())));
        assert_eq!(p("show me some charts").action, ActionClass::PlotRequest);
        assert_eq!(p("describe the structure").action, ActionClass::DescribeStructural);
        assert_eq!(
            p("give me a statistical description").action,
            ActionClass::DescribeStatistical
        );
        // non-generic verbs ignore topic nouns
        assert_eq!(p("cluster the correlation matrix").action, ActionClass::Cluster);
    }

    #[test]
    fn unknown_is_empty() {
        let i = p("florble the wugs");
        assert_eq!(i.action, ActionClass::Unknown);
        assert!(i.slots.is_empty());
        assert!(i.matched_terms.is_empty());
        assert_eq!(p("").action, ActionClass::Unknown);
    }

    #[test]
    fn yes_no_need_a_pending_question() {
        let v = Vocabulary::default_shipped();
        let pending = SessionContext {
            pending: Some(PendingKind::Feedback),
            ..SessionContext::default()
        };
        assert_eq!(parse(&v, "Ok.", &pending).action, ActionClass::AcceptSuggestion);
        assert_eq!(parse(&v, "no thanks", &pending).action, ActionClass::RejectSuggestion);
        assert_eq!(p("Ok.").action, ActionClass::Unknown);
        let i = parse(&v, "not useful", &pending);
        assert_eq!(i.action, ActionClass::ProvideFeedback);
        assert_eq!(i.slots.rating, Some(Rating::Dislike));
    }

    #[test]
    fn context_answers() {
        let v = Vocabulary::default_shipped();
        let ctx = SessionContext {
            pending: Some(PendingKind::DescriptionChoice),
            ..SessionContext::default()
        };
        assert_eq!(
            parse(&v, "statistical please", &ctx).action,
            ActionClass::DescribeStatistical
        );
        assert_eq!(
            parse(&v, "a structural one", &ctx).action,
            ActionClass::DescribeStructural
        );
        let ctx = SessionContext {
            pending: Some(PendingKind::SheetChoice),
            sheet_names: vec!["Table 1".into(), "Notes".into()],
            ..SessionContext::default()
        };
        let i = parse(&v, "only table 1", &ctx);
        assert_eq!(i.action, ActionClass::TransformData);
        assert_eq!(
            i.slots.sheet_selector,
            Some(SheetSelector::Names(vec!["Table 1".into()]))
        );
        let i = parse(&v, "all of them", &ctx);
        assert_eq!(i.slots.sheet_selector, Some(SheetSelector::All));
    }

    #[test]
    fn numbers_become_hints() {
        let i = p("eliminate variables with a coefficient greater than 0,95");
        assert_eq!(i.action, ActionClass::ExcludeAttribute);
        assert_eq!(i.slots.threshold_hint, Some(0.95));
        let i = p("cluster the data into 4 groups");
        assert_eq!(i.action, ActionClass::Cluster);
        assert_eq!(i.slots.k_hint, Some(4));
        assert_eq!(p("plot 4 histograms").slots.k_hint, None);
    }

    #[test]
    fn attributes_come_from_loaded_columns() {
        let v = Vocabulary::default_shipped();
        let ctx = loaded(&["Life Expectancy", "gdp", "region"]);
        let i = parse(&v, "exclude region and life expectancy, also population", &ctx);
        assert_eq!(i.action, ActionClass::ExcludeAttribute);
        assert_eq!(i.slots.attribute_names, vec!["region", "Life Expectancy"]);
        let i = parse(&v, "remove \"GDP\"", &ctx);
        assert_eq!(i.slots.attribute_names, vec!["gdp"]);
        // without a dataset nothing is reported
        assert!(p("exclude region").slots.attribute_names.is_empty());
    }

    #[test]
    fn feedback_ratings() {
        assert_eq!(p("I like this plot").slots.rating, Some(Rating::Like));
        assert_eq!(p("I don't like it").slots.rating, Some(Rating::Dislike));
        assert_eq!(p("I dislike that").slots.rating, Some(Rating::Dislike));
        assert_eq!(
            p("I would like to explore my data").action,
            ActionClass::ExploreHandshake
        );
    }

    #[test]
    fn inflections_and_typos() {
        assert_eq!(p("clustering please").action, ActionClass::Cluster);
        assert_eq!(p("stopped").action, ActionClass::EndSession);
        let i = p("clustr the rows");
        assert_eq!(i.action, ActionClass::Cluster);
        assert_eq!(i.confidence, Confidence::Fuzzy);
        assert_eq!(p("visualize it").confidence, Confidence::Synonym);
    }

    #[test]
    fn session_verbs() {
        assert_eq!(p("pause the session").action, ActionClass::PauseSession);
        assert_eq!(p("let's resume").action, ActionClass::ResumeSession);
        assert_eq!(p("goodbye").action, ActionClass::EndSession);
    }

    proptest! {
        #[test]
        fn parse_is_total_and_deterministic(s in ".{0,80}") {
            let v = Vocabulary::default_shipped();
            let ctx = loaded(&["a", "b c"]);
            let first = parse(&v, &s, &ctx);
            prop_assert_eq!(&first, &parse(&v, &s, &ctx));
            if first.action == ActionClass::Unknown {
                prop_assert!(first.slots.is_empty());
            }
            for name in &first.slots.attribute_names {
                prop_assert!(ctx.columns.contains(name));
            }
        }

        #[test]
        fn attribute_names_subset_of_columns(
            cols in prop::collection::vec("[a-z]{1,6}( [a-z]{1,4})?", 0..5),
            words in prop::collection::vec("[a-z]{1,6}", 0..10),
        ) {
            let v = Vocabulary::default_shipped();
            let ctx = SessionContext { dataset_loaded: true, columns: cols.clone(), ..SessionContext::default() };
            let text = format!("exclude {}", words.join(" "));
            let i = parse(&v, &text, &ctx);
            for name in &i.slots.attribute_names {
                prop_assert!(cols.contains(name));
            }
        }
    }

    #[test]
    fn synonym_closure() {
        let v = Vocabulary::default_shipped();
        let ctx = SessionContext::default();
        for entry in v.entries() {
            let expected = parse(&v, &entry.lemma, &ctx).action;
            if entry.word_class == WordClass::ActionVerb {
                assert_eq!(Some(expected), entry.action_class, "{}", entry.lemma);
            }
            for s in &entry.synonyms {
                assert_eq!(parse(&v, s, &ctx).action, expected, "{} / {s}", entry.lemma);
            }
        }
    }
}
