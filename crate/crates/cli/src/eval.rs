//! Corpus evaluation harness.

use std::path::PathBuf;

use anyhow::{Context, Result};
use convex_core::metrics::{run_corpus, Corpus, CorpusError, CorpusReport, Fixtures, RunOptions};

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// `None` runs the shipped corpus.
    pub corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fixtures: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum EvalOutcome {
    Report(Box<CorpusReport>),
    /// The corpus failed validation; the text lists what is wrong.
    Schema(String),
}

pub fn run(config: &EvalConfig) -> Result<EvalOutcome> {
    let loaded = match &config.corpus {
        Some(path) => Corpus::load(path),
        None => Ok(Corpus::shipped()),
    };
    let corpus = match loaded {
        Ok(c) => c,
        Err(CorpusError::Schema(e)) => return Ok(EvalOutcome::Schema(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let options = RunOptions {
        realization_seed: config.seed,
        fixtures: config.fixtures.clone().map_or(Fixtures::Shipped, Fixtures::Dir),
        parallel: true,
    };
    let run = match run_corpus(&corpus, &options) {
        Ok(run) => run,
        Err(e) => return Ok(EvalOutcome::Schema(e.to_string())),
    };
    if let Some(out) = &config.out {
        std::fs::write(out, run.report.to_json()).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(EvalOutcome::Report(Box::new(run.report)))
}
