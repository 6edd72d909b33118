use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::DateTime;
use proptest::prelude::*;
use serde_json::json;

use super::*;
use crate::dialogue::Engine;
use crate::executor::SteppingClock;
use crate::intent::{ActionClass, Rating, Vocabulary};
use crate::session::{SessionStatus, Speaker, Survey, Turn};

const CORPUS_SEED: u64 = 42;
const CORPUS_CASES: usize = 30;

fn shipped_generation() -> Corpus {
    generate_corpus(
        CORPUS_SEED,
        CORPUS_CASES,
        &TemplateLibrary::default_shipped(),
        &Vocabulary::default_shipped(),
    )
}

/// Rewrites the shipped corpus: `CONVEX_WRITE_CORPUS=1 cargo test -p convex-core regenerate`.
#[test]
fn regenerate_shipped_corpus() {
    if std::env::var_os("CONVEX_WRITE_CORPUS").is_some() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/conversation_corpus.json");
        std::fs::write(path, shipped_generation().to_json()).unwrap();
    }
}

#[test]
fn shipped_corpus_is_the_seeded_generation() {
    let shipped = Corpus::shipped();
    assert_eq!(shipped, shipped_generation());
    assert_eq!(shipped.cases.len(), CORPUS_CASES);
    shipped.validate(&TemplateLibrary::default_shipped()).unwrap();
}

fn engine() -> Engine {
    Engine::with_clock(Arc::new(SteppingClock::default()))
}

fn user_turn(index: usize, intent: Option<ActionClass>) -> Turn {
    Turn {
        index,
        speaker: Speaker::User,
        text: String::new(),
        pattern_tag: None,
        artifacts: Vec::new(),
        feedback: None,
        timestamp: DateTime::from_timestamp(0, 0).unwrap(),
        intent,
        upload: false,
        node: None,
    }
}

fn session_with(intents: &[Option<ActionClass>]) -> Session {
    let mut s = engine().new_session("u", 1);
    s.turns = intents.iter().enumerate().map(|(i, a)| user_turn(i, *a)).collect();
    s
}

#[test]
fn m1_counts_attempts_until_recognition() {
    let hit = Some(ActionClass::Correlate);
    assert_eq!(m1(&[session_with(&[hit, hit, hit])]), Some(1.0));
    assert_eq!(m1_attempts(&session_with(&[None, hit])), vec![2]);
    // attempts 1, 2 and 3
    let s = session_with(&[hit, None, hit, None, None, hit, None]);
    assert_eq!(m1_attempts(&s), vec![1, 2, 3]);
    assert_eq!(m1(&[s]), Some(2.0));
    assert_eq!(m1(&[session_with(&[None, None])]), None);
    assert_eq!(m1(&[]), None);
}

#[test]
fn m1_from_a_live_clarification() {
    let e = engine();
    let mut s = e.new_session("u", 1);
    e.handle_turn(&mut s, "blue elephants dance").unwrap();
    e.handle_turn(&mut s, "Help me to analyse my data").unwrap();
    assert_eq!(m1_attempts(&s), vec![2]);
}

fn graph(nodes: &[&str], edges: &[(usize, usize)]) -> PlanGraph {
    PlanGraph {
        nodes: nodes
            .iter()
            .map(|op| GraphNode {
                op: op.to_string(),
                params: Default::default(),
            })
            .collect(),
        edges: edges.iter().copied().collect(),
    }
}

#[test]
fn m2_examples() {
    let chain = graph(&["a", "b", "c", "d"], &[(0, 1), (1, 2), (2, 3)]);
    assert_eq!(
        m2(&chain, &chain).scores(),
        PlanScores {
            node_precision: 1.0,
            node_recall: 1.0,
            edge_precision: 1.0,
            edge_recall: 1.0
        }
    );
    // the generated plan misses the last gold node and its edge
    let short = graph(&["a", "b", "c"], &[(0, 1), (1, 2)]);
    let s = m2(&short, &chain).scores();
    assert_eq!((s.node_precision, s.node_recall, s.edge_precision), (1.0, 0.75, 1.0));
    assert!((s.edge_recall - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(brute_force_match(&short, &chain), match_graphs(&short, &chain));
    let other = graph(&["x", "y"], &[(0, 1)]);
    let z = m2(&other, &chain).scores();
    assert_eq!(
        [z.node_precision, z.node_recall, z.edge_precision, z.edge_recall],
        [0.0; 4]
    );
}

#[test]
fn m2_normalizes_params() {
    let lib = TemplateLibrary::default_shipped();
    let node = |params: serde_json::Value| GraphNode {
        op: "cluster".into(),
        params: lib.normalized_params("cluster", &serde_json::from_value(params).unwrap()),
    };
    let a = PlanGraph {
        nodes: vec![node(json!({}))],
        edges: BTreeSet::new(),
    };
    let b = PlanGraph {
        nodes: vec![node(json!({"restarts": 5, "k": "auto"}))],
        edges: BTreeSet::new(),
    };
    assert_eq!(m2(&a, &b).matched_nodes, 1);
    let c = PlanGraph {
        nodes: vec![node(json!({"k": 3}))],
        edges: BTreeSet::new(),
    };
    assert_eq!(m2(&a, &c).matched_nodes, 0);
}

#[test]
fn m2_prefers_the_matching_that_keeps_edges() {
    // two equal `v` nodes; only pairing them crosswise preserves both edges
    let a = graph(&["v", "v", "p", "q"], &[(0, 2), (1, 3)]);
    let b = graph(&["p", "q", "v", "v"], &[(3, 0), (2, 1)]);
    assert_eq!(match_graphs(&a, &b), Matching { nodes: 4, edges: 2 });
}

fn arb_graph() -> impl Strategy<Value = PlanGraph> {
    (1usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), n),
            prop::collection::btree_set((0..n, 0..n), 0..(n * 2)),
        )
            .prop_map(|(ops, edges)| {
                let edges: Vec<(usize, usize)> = edges.into_iter().filter(|(f, t)| f != t).collect();
                graph(&ops, &edges)
            })
    })
}

proptest! {
    #[test]
    fn m2_is_symmetric_and_agrees_with_brute_force(a in arb_graph(), b in arb_graph()) {
        let ab = m2(&a, &b);
        let ba = m2(&b, &a);
        let (s, t) = (ab.scores(), ba.scores());
        prop_assert_eq!(s.node_precision, t.node_recall);
        prop_assert_eq!(s.node_recall, t.node_precision);
        prop_assert_eq!(s.edge_precision, t.edge_recall);
        prop_assert_eq!(s.edge_recall, t.edge_precision);
        prop_assert_eq!(match_graphs(&a, &b), brute_force_match(&a, &b));
        for v in [s.node_precision, s.node_recall, s.edge_precision, s.edge_recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn nps_and_csat_stay_in_range(rec in prop::collection::vec(0u8..=10, 0..40), sat in prop::collection::vec(1u8..=5, 0..40)) {
        let m = m5(&sat, &rec);
        if let Some(nps) = m.nps {
            prop_assert!((-100.0..=100.0).contains(&nps));
        }
        if let Some(c) = m.csat_mean {
            prop_assert!((1.0..=5.0).contains(&c));
        }
        prop_assert_eq!(m.promoters + m.passives + m.detractors, rec.len());
    }
}

#[test]
fn m3_m4_m5_examples() {
    let mut s = session_with(&[]);
    for (i, r) in [Rating::Like, Rating::Like, Rating::Dislike].into_iter().enumerate() {
        let mut t = user_turn(i, None);
        t.speaker = Speaker::Bot;
        t.feedback = Some(r);
        s.turns.push(t);
    }
    let f = m3(std::slice::from_ref(&s));
    assert_eq!((f.likes, f.dislikes), (2, 1));
    assert!((f.like_ratio.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(m3(&[session_with(&[])]).like_ratio, None);

    let mut sessions: Vec<Session> = (0..5).map(|_| session_with(&[])).collect();
    for (i, s) in sessions.iter_mut().enumerate().take(4) {
        s.status = if i < 3 {
            SessionStatus::Completed
        } else {
            SessionStatus::Abandoned
        };
        if i < 3 {
            s.story = Some("art-0001".into());
        }
    }
    let c = m4(&sessions);
    assert_eq!((c.stories, c.terminated, c.completion_rate), (3, 4, Some(0.75)));
    assert_eq!(m4(&sessions[4..]).completion_rate, None);

    let m = m5(&[5, 4, 3], &[10, 9, 9, 8, 7, 6, 3, 10, 9, 2]);
    assert_eq!((m.promoters, m.passives, m.detractors), (5, 2, 3));
    assert!((m.nps.unwrap() - 20.0).abs() < 1e-12);
    assert_eq!(m.csat_mean, Some(4.0));
    assert_eq!(m5(&[], &[]), Satisfaction::default());
}

#[test]
fn fresh_report_is_undefined_not_zero() {
    let r = MetricsReport::from_sessions(&[], &engine().versions());
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["m1_mean_interactions_to_intent"], serde_json::Value::Null);
    assert_eq!(v["m2"], serde_json::Value::Null);
    assert_eq!(v["m3_like_ratio"], serde_json::Value::Null);
    assert_eq!(v["m4_completion_rate"], serde_json::Value::Null);
    assert_eq!(v["m5"]["nps"], serde_json::Value::Null);
    assert!(r.table().contains("undefined"));
}

#[test]
fn shipped_corpus_runs_clean() {
    let run = run_corpus(&Corpus::shipped(), &RunOptions::default()).unwrap();
    let r = &run.report;
    for c in &r.case_reports {
        assert!(c.errors.is_empty(), "{}: {:?}", c.id, c.errors);
        assert_eq!(c.intents_matched, c.intents_expected, "{}: {:?}", c.id, c.utterances);
        assert_eq!(c.plan.matched_nodes, c.plan.gold_nodes, "{} {:?}", c.id, c.plan);
        assert_eq!(c.plan.matched_edges, c.plan.gold_edges, "{} {:?}", c.id, c.plan);
    }
    let m = &r.metrics;
    assert!(
        m.m1_mean_interactions_to_intent.unwrap() > 1.0,
        "noise turns cost extra attempts"
    );
    assert!(m.m3_like_ratio.is_some() && m.m4_completion_rate == Some(1.0));
    assert!(m.m5.csat_mean.is_some() && m.m5.nps.is_some());
    assert!(!m.vocabulary_version.is_empty() && !m.template_version.is_empty());
}

#[test]
fn runs_are_deterministic_and_order_independent() {
    let corpus = Corpus::shipped();
    let a = run_corpus(&corpus, &RunOptions::default()).unwrap();
    let b = run_corpus(
        &corpus,
        &RunOptions {
            parallel: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    for (x, y) in a.sessions.iter().zip(&b.sessions) {
        assert_eq!(x.workspace.blobs, y.workspace.blobs);
    }
}

#[test]
fn reseeding_changes_only_the_wording() {
    let corpus = Corpus::shipped();
    let base = run_corpus(&corpus, &RunOptions::default()).unwrap().report;
    for seed in [1, 7, 99] {
        let opts = RunOptions {
            realization_seed: Some(seed),
            parallel: true,
            ..RunOptions::default()
        };
        let r = run_corpus(&corpus, &opts).unwrap().report;
        assert_ne!(r.case_reports[0].utterances, base.case_reports[0].utterances);
        assert_eq!(r.metrics.m2, base.metrics.m2, "seed {seed}");
        assert_eq!(
            r.intent_accuracy,
            1.0,
            "seed {seed}: {:?}",
            r.case_reports.iter().find(|c| c.intents_matched < c.intents_expected)
        );
        assert_eq!(r.failed_cases, 0);
    }
}

#[test]
fn gold_equal_to_a_template_scores_one() {
    let mut corpus = Corpus::shipped();
    corpus.cases.truncate(1);
    let r = run_corpus(&corpus, &RunOptions::default()).unwrap().report;
    let s = r.metrics.m2.unwrap();
    assert_eq!(
        [s.node_precision, s.node_recall, s.edge_precision, s.edge_recall],
        [1.0; 4]
    );
}

#[test]
fn corpus_schema_errors() {
    let mut corpus = Corpus::shipped();
    corpus.cases.clear();
    assert_eq!(
        run_corpus(&corpus, &RunOptions::default()).err(),
        Some(CorpusSchemaError::Empty)
    );
    let err =
        Corpus::from_json(r#"{"schema_version": 1, "corpus_id": "x", "seed": 0, "cases": [{"id": 3}]}"#).unwrap_err();
    assert!(
        matches!(err, CorpusSchemaError::Json { ref path, .. } if path == "cases[0].id"),
        "{err}"
    );
    let err = Corpus::from_json(r#"{"schema_version": 9, "corpus_id": "x", "seed": 0, "cases": []}"#).unwrap_err();
    assert_eq!(err, CorpusSchemaError::Version { found: 9 });
    let mut corpus = Corpus::shipped();
    corpus.cases[0].gold_plan.nodes[0].op = "teleport".into();
    assert!(matches!(
        corpus.validate(&TemplateLibrary::default_shipped()),
        Err(CorpusSchemaError::Case { .. })
    ));
    let mut corpus = Corpus::shipped();
    corpus.cases[0]
        .gold_plan
        .edges
        .retain(|(_, to)| !to.ends_with(".transform"));
    let err = corpus.validate(&TemplateLibrary::default_shipped()).unwrap_err();
    assert!(err.to_string().contains("unsatisfied input"), "{err}");
}

#[test]
fn stored_sessions_reproduce_live_metrics() {
    let run = run_corpus(&Corpus::shipped(), &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = crate::session_store::SessionStore::open(dir.path()).unwrap();
    for s in &run.sessions {
        store.save_session(s).unwrap();
    }
    let versions = engine().versions();
    let live = MetricsReport::from_sessions(&run.sessions, &versions);
    let mut loaded = store.load_all().unwrap();
    loaded.sort_by_key(|s| s.id);
    assert_eq!(MetricsReport::from_sessions(&loaded, &versions), live);
    let mut expected = run.report.metrics.clone();
    expected.m2 = None;
    expected.m2_counts = None;
    assert_eq!(live, expected);
}

#[test]
fn survey_answers_are_checked() {
    let e = engine();
    let mut s = e.new_session("u", 1);
    let bad = Survey {
        recommend: Some(11),
        satisfaction: None,
    };
    assert!(e.record_survey(&mut s, bad).is_err());
    assert!(e
        .record_survey(
            &mut s,
            Survey {
                recommend: None,
                satisfaction: Some(0)
            }
        )
        .is_err());
    e.record_survey(
        &mut s,
        Survey {
            recommend: Some(9),
            satisfaction: Some(4),
        },
    )
    .unwrap();
    assert_eq!(m5_sessions(&[s]).nps, Some(100.0));
}
