//! Manifest-driven benchmark runs.

use std::io::BufRead;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::problem::{build, Source};
use crate::record::RunRecord;
use crate::run::{run, Cell, LambdaChoice, PenaltyKind, SolverKind};

pub const THREADS_VAR: &str = "SQRTREG_THREADS";

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub problem: String,
    pub solver: SolverKind,
    pub penalty: PenaltyKind,
    pub w1: f64,
    pub lambda_rule: String,
    pub seed: u64,
}

/// Parses line-delimited JSON; blank lines and `#` comments are skipped.
pub fn read_manifest(reader: impl BufRead) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let e = serde_json::from_str(t).map_err(|e| CliError::Manifest {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(e);
    }
    Ok(out)
}

fn run_entry(e: &Entry, tol: f64, max_time: f64) -> RunRecord {
    let attempt = || -> Result<RunRecord> {
        let source: Source = e.problem.parse()?;
        let lambda: LambdaChoice = e.lambda_rule.parse()?;
        let problem = build(&source, e.seed, true, None)?;
        let cell = Cell {
            solver: e.solver,
            penalty: e.penalty,
            w1: e.w1,
            lambda,
            cv_w1: false,
            seed: e.seed,
            tol,
            max_time,
        };
        Ok(run(&problem, &cell)?.record)
    };
    attempt().unwrap_or_else(|err| {
        RunRecord::failed(&e.problem, e.solver.name(), e.penalty.name(), &e.lambda_rule, e.w1, e.seed, err.to_string())
    })
}

/// Pool size from `SQRTREG_THREADS`, else rayon's default.
pub fn pool_threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(0),
    }
}

/// Runs every entry; failures become records and the run continues. Output
/// order follows the manifest.
pub fn run_manifest(entries: &[Entry], tol: f64, max_time: f64, threads: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pool.install(|| entries.par_iter().map(|e| run_entry(e, tol, max_time)).collect()))
}
