//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Set `CONVEX_SMOKE_CSV` to a CSV export to run the optional full-pipeline
//! smoke test on that dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use convex_core::clustering::{cluster_table, ClusteringConfig, KChoice};
use convex_core::dialogue::Engine;
use convex_core::executor::{ArtifactKind, SteppingClock};
use convex_core::intent::{IntentCorpus, Vocabulary};
use convex_core::metrics::{m2, m4, m5, run_corpus, Corpus, Fixtures, GraphNode, PlanGraph, RunOptions};
use convex_core::profiler::{correlation_matrix, prune_correlated};
use convex_core::session::{Session, SessionStatus};
use convex_core::storyteller::check_story_links;
use convex_core::tabular::{Column, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn numeric_table(columns: Vec<(&str, Vec<f64>)>) -> Table {
    let cols = columns
        .into_iter()
        .map(|(name, v)| Column::numeric(name, v.into_iter().map(Some).collect()))
        .collect();
    Table::new("t", cols).expect("valid table")
}

/// Pearson r from raw sums, independent of the library's centred computation.
fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

fn correlation_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..20).map(|_| rng.random_range(-10.0..10.0)).collect())
            .collect();
        let names = ["a", "b", "c", "d", "e"];
        let table = numeric_table(names.iter().copied().zip(data.clone()).collect());
        let m = correlation_matrix(&table).map_err(|e| format!("seed {seed}: {e}"))?;
        for i in 0..5 {
            for j in 0..5 {
                let got = m.r[i][j].ok_or_else(|| format!("seed {seed}: r[{i}][{j}] undefined"))?;
                let want = if i == j {
                    1.0
                } else {
                    direct_pearson(&data[i], &data[j])
                };
                worst = worst.max((got - want).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("max deviation {worst:e} > 1e-9"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("10 tables 20x5, max |dr| = {worst:.1e}, {elapsed:.1?}"))
}

fn pruning() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..100.0)).collect();
    let c: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..100.0)).collect();
    let table = numeric_table(vec![("a", a.clone()), ("a_copy", a.clone()), ("c", c.clone())]);
    let first = prune_correlated(&table, 0.95).map_err(|e| e.to_string())?;
    let dropped: Vec<&str> = first.dropped.iter().map(|d| d.name.as_str()).collect();
    ensure(dropped == ["a_copy"], || format!("dropped {dropped:?}"))?;
    ensure(first.kept == ["a", "c"], || format!("kept {:?}", first.kept))?;
    let kept = numeric_table(vec![("a", a), ("c", c)]);
    let second = prune_correlated(&kept, 0.95).map_err(|e| e.to_string())?;
    ensure(second.dropped.is_empty() && second.kept == first.kept, || {
        format!("second pass dropped {:?}", second.dropped)
    })?;
    Ok("dropped exactly the duplicate; idempotent on the kept set".into())
}

/// Three centres drawn uniformly from [-10, 10]^4, redrawn until every pair
/// is at least 10 apart (10x the unit blob std).
fn blob_centres(rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    let dist = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    loop {
        let c: Vec<[f64; 4]> = (0..3)
            .map(|_| std::array::from_fn(|_| rng.random_range(-10.0..10.0)))
            .collect();
        if dist(&c[0], &c[1]) >= 10.0 && dist(&c[0], &c[2]) >= 10.0 && dist(&c[1], &c[2]) >= 10.0 {
            return c;
        }
    }
}

fn auto_k() -> Outcome {
    let start = Instant::now();
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut passed = 0;
    let mut failures = Vec::new();
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = blob_centres(&mut rng);
        let mut cols = vec![Vec::new(); 4];
        let mut truth = Vec::new();
        for (label, centre) in centres.iter().enumerate() {
            for _ in 0..20 {
                for (f, col) in cols.iter_mut().enumerate() {
                    col.push(centre[f] + noise.sample(&mut rng));
                }
                truth.push(label);
            }
        }
        let table = numeric_table(vec![
            ("f1", cols[0].clone()),
            ("f2", cols[1].clone()),
            ("f3", cols[2].clone()),
            ("f4", cols[3].clone()),
        ]);
        let config = ClusteringConfig {
            k: KChoice::Auto,
            seed,
            ..ClusteringConfig::default()
        };
        let result = match cluster_table(&table, &config) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let mut mapping: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (row, assigned) in result.assignments.iter().enumerate() {
            if let Some(c) = assigned {
                mapping.entry(truth[row]).or_default().insert(*c);
            }
        }
        let images: BTreeSet<usize> = mapping.values().flatten().copied().collect();
        let bijective = mapping.len() == 3 && mapping.values().all(|s| s.len() == 1) && images.len() == 3;
        let complete = result.assignments.iter().all(Option::is_some);
        if result.k == 3 && bijective && complete {
            passed += 1;
        } else {
            failures.push(format!("seed {seed}: k = {}, labels match = {bijective}", result.k));
        }
    }
    let elapsed = start.elapsed();
    ensure(passed == 10, || format!("{passed}/10 seeds; {}", failures.join("; ")))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("k = 3 with matching labels for 10/10 seeds, {elapsed:.1?}"))
}

fn engine() -> Engine {
    Engine::with_clock(Arc::new(SteppingClock::default()))
}

fn countries() -> &'static [u8] {
    convex_core::metrics::shipped_fixture("countries.csv").expect("shipped fixture")
}

fn end_to_end() -> Outcome {
    let e = engine();
    let mut s = e.new_session("tester", 1);
    let fail = |step: &str, err: String| format!("{step}: {err}");
    let reply = e
        .handle_turn(&mut s, "Help me to analyse my data")
        .map_err(|x| fail("handshake", x.to_string()))?;
    ensure(
        reply.iter().any(|t| t.text == "Please upload your data collection."),
        || "handshake did not ask for the upload".into(),
    )?;
    e.upload(&mut s, countries(), "countries.csv", None)
        .map_err(|x| fail("upload", x.to_string()))?;
    e.handle_turn(&mut s, "statistical")
        .map_err(|x| fail("description", x.to_string()))?;
    let reply = e
        .handle_turn(
            &mut s,
            "Analyse the linear correlation between each couple of numerical attributes",
        )
        .map_err(|x| fail("correlation", x.to_string()))?;
    ensure(
        reply.iter().any(|t| t.text == "Are these results what you expected?"),
        || "no feedback question after the correlation".into(),
    )?;
    e.handle_turn(&mut s, "yes")
        .map_err(|x| fail("feedback", x.to_string()))?;
    e.handle_turn(&mut s, "tell me the story")
        .map_err(|x| fail("end", x.to_string()))?;
    ensure(s.status == SessionStatus::Completed, || {
        format!("status {:?}", s.status)
    })?;
    let rate = m4(std::slice::from_ref(&s)).completion_rate;
    ensure(rate == Some(1.0), || format!("M4 = {rate:?}"))?;
    let story_id = s.story.clone().ok_or("no story")?;
    let story = String::from_utf8(s.workspace.payload(&story_id).ok_or("story payload missing")?.to_vec())
        .map_err(|x| x.to_string())?;
    for section in ["Overview", "Profile", "Correlation"] {
        ensure(
            story.lines().any(|l| l.starts_with("## ") && l.contains(section)),
            || format!("story lacks a {section} section"),
        )?;
    }
    let broken = check_story_links(&story, &s);
    ensure(broken.is_empty(), || format!("unresolved references: {broken:?}"))?;
    Ok(format!(
        "completed, M4 = 1.0, story of {} bytes with resolvable references",
        story.len()
    ))
}

fn payloads(s: &Session) -> Vec<(ArtifactKind, String)> {
    s.workspace.artifacts.iter().map(|a| (a.kind, a.hash.clone())).collect()
}

fn pause_resume() -> Outcome {
    let script_head = ["Help me to analyse my data", "@upload", "statistical"];
    let script_tail = [
        "analyse the correlation",
        "yes",
        "cluster the data",
        "no",
        "tell me the story",
    ];
    let run = |e: &Engine, s: &mut Session, lines: &[&str]| -> Result<(), String> {
        for line in lines {
            if *line == "@upload" {
                e.upload(s, countries(), "countries.csv", None)
                    .map_err(|x| x.to_string())?;
            } else {
                e.handle_turn(s, line).map_err(|x| format!("{line}: {x}"))?;
            }
        }
        Ok(())
    };
    let e1 = engine();
    let mut straight = e1.new_session("u", 9);
    run(&e1, &mut straight, &script_head)?;
    run(&e1, &mut straight, &script_tail)?;

    let e2 = engine();
    let mut first = e2.new_session("u", 9);
    run(&e2, &mut first, &script_head)?;
    ensure(first.has_completed("profile"), || "profile did not complete".into())?;
    let snapshot = e2.pause(&mut first).map_err(|x| x.to_string())?.to_json();
    drop(first);
    let mut resumed = e2.restore(&snapshot).map_err(|x| x.to_string())?;
    run(&e2, &mut resumed, &script_tail)?;

    ensure(
        straight.status == SessionStatus::Completed && resumed.status == SessionStatus::Completed,
        || "a run did not complete".into(),
    )?;
    let (a, b) = (payloads(&straight), payloads(&resumed));
    ensure(a == b, || format!("artifact hashes differ: {a:?} vs {b:?}"))?;
    for art in &straight.workspace.artifacts {
        ensure(
            straight.workspace.payload(&art.id) == resumed.workspace.payload(&art.id),
            || format!("payload {} differs", art.id),
        )?;
    }
    Ok(format!(
        "{} artifacts byte-identical after pause at the profile step",
        a.len()
    ))
}

fn intent_corpus() -> Outcome {
    let corpus = IntentCorpus::default_shipped();
    let acc = corpus.evaluate(&Vocabulary::default_shipped());
    ensure(acc.total == 30, || format!("corpus has {} utterances", acc.total))?;
    ensure(acc.accuracy() >= 0.9, || {
        format!("accuracy {:.3}; misses {:?}", acc.accuracy(), acc.misses)
    })?;
    ensure(acc.verbatim_accuracy() == 1.0, || {
        format!("verbatim accuracy {:.3}", acc.verbatim_accuracy())
    })?;
    Ok(format!(
        "{}/{} correct ({:.1}%), verbatim {}/{}",
        acc.correct,
        acc.total,
        100.0 * acc.accuracy(),
        acc.verbatim_correct,
        acc.verbatim_total
    ))
}

fn shipped_options() -> RunOptions {
    RunOptions {
        realization_seed: None,
        fixtures: Fixtures::Shipped,
        parallel: true,
    }
}

fn m2_self_consistency() -> Outcome {
    let run = run_corpus(&Corpus::shipped(), &shipped_options()).map_err(|e| e.to_string())?;
    for case in &run.report.case_reports {
        let s = case.plan_scores;
        let all = [s.node_precision, s.node_recall, s.edge_precision, s.edge_recall];
        ensure(all == [1.0; 4], || format!("{}: scores {all:?}", case.id))?;
    }
    let graph = |ops: &[&str], edges: &[(usize, usize)]| PlanGraph {
        nodes: ops
            .iter()
            .map(|op| GraphNode {
                op: (*op).into(),
                params: BTreeMap::new(),
            })
            .collect(),
        edges: edges.iter().copied().collect(),
    };
    let gold = graph(&["a", "b", "c", "d"], &[(0, 1), (1, 2), (2, 3)]);
    let generated = graph(&["a", "b", "c"], &[(0, 1), (1, 2)]);
    let s = m2(&generated, &gold).scores();
    let got = [s.node_precision, s.node_recall, s.edge_precision, s.edge_recall];
    let want = [1.0, 0.75, 1.0, 2.0 / 3.0];
    ensure(got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-12), || {
        format!("chain example gave {got:?}")
    })?;
    Ok(format!(
        "{} shipped cases at 1.0; chain example (1.0, 0.75, 1.0, 0.667)",
        run.report.case_reports.len()
    ))
}

fn m5_arithmetic() -> Outcome {
    let s = m5(&[], &[10, 9, 9, 8, 7, 6, 3, 10, 9, 2]);
    ensure(s.nps == Some(20.0), || format!("NPS = {:?}", s.nps))?;
    Ok(format!(
        "NPS = 20 ({} promoters, {} passives, {} detractors)",
        s.promoters, s.passives, s.detractors
    ))
}

fn determinism() -> Outcome {
    let corpus = Corpus::shipped();
    let options = RunOptions {
        realization_seed: Some(5),
        ..shipped_options()
    };
    let a = run_corpus(&corpus, &options).map_err(|e| e.to_string())?;
    let b = run_corpus(&corpus, &options).map_err(|e| e.to_string())?;
    ensure(a.report.to_json() == b.report.to_json(), || "reports differ".into())?;
    let mut artifacts = 0;
    for (x, y) in a.sessions.iter().zip(&b.sessions) {
        ensure(payloads(x) == payloads(y), || {
            format!("session {} artifacts differ", x.id)
        })?;
        for art in &x.workspace.artifacts {
            ensure(x.workspace.payload(&art.id) == y.workspace.payload(&art.id), || {
                format!("payload {} differs", art.id)
            })?;
            artifacts += 1;
        }
    }
    Ok(format!(
        "identical reports and {artifacts} identical artifacts over two runs"
    ))
}

fn dataset_smoke(path: &str) -> Outcome {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let e = engine();
    let mut s = e.new_session("smoke", 1);
    let name = std::path::Path::new(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    e.handle_turn(&mut s, "Help me to analyse my data")
        .map_err(|x| x.to_string())?;
    e.upload(&mut s, &bytes, &name, None).map_err(|x| x.to_string())?;
    for line in [
        "statistical",
        "analyse the correlation",
        "yes",
        "cluster the data",
        "yes",
        "tell me the story",
    ] {
        e.handle_turn(&mut s, line).map_err(|x| format!("{line}: {x}"))?;
    }
    ensure(s.status == SessionStatus::Completed, || {
        format!("status {:?}", s.status)
    })?;
    for op in ["profile", "correlation_matrix", "cluster"] {
        ensure(s.has_completed(op), || format!("{op} did not complete"))?;
    }
    for art in &s.workspace.artifacts {
        let bytes = s
            .workspace
            .payload(&art.id)
            .ok_or_else(|| format!("{} has no payload", art.id))?;
        let ok = match art.media_type.as_str() {
            "application/json" => serde_json::from_slice::<serde_json::Value>(bytes).is_ok(),
            "image/svg+xml" => {
                std::str::from_utf8(bytes).is_ok_and(|t| t.contains("<svg") && t.trim_end().ends_with("</svg>"))
            }
            _ => std::str::from_utf8(bytes).is_ok(),
        };
        ensure(ok, || format!("{} ({}) is malformed", art.id, art.media_type))?;
    }
    let story = s
        .story
        .as_ref()
        .and_then(|id| s.workspace.payload(id))
        .ok_or("no story")?;
    let broken = check_story_links(&String::from_utf8_lossy(story), &s);
    ensure(broken.is_empty(), || format!("unresolved references: {broken:?}"))?;
    Ok(format!("{} well-formed artifacts", s.workspace.artifacts.len()))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("correlation oracle", correlation_oracle),
        ("pruning", pruning),
        ("auto-k", auto_k),
        ("end-to-end conversation", end_to_end),
        ("pause/resume differential", pause_resume),
        ("intent corpus", intent_corpus),
        ("M2 self-consistency", m2_self_consistency),
        ("M5 arithmetic", m5_arithmetic),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    match std::env::var("CONVEX_SMOKE_CSV") {
        Ok(path) if !path.is_empty() => match dataset_smoke(&path) {
            Ok(detail) => println!("PASS dataset smoke test: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL dataset smoke test: {detail}");
            }
        },
        _ => println!("SKIP dataset smoke test: set CONVEX_SMOKE_CSV to a CSV export to run it"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
