//! Result records and their text rendering.

use serde::{Deserialize, Serialize};

/// One solver run, as persisted in the line-delimited results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub solver: String,
    pub penalty: String,
    pub lambda_rule: String,
    pub lambda: f64,
    pub w1: f64,
    pub w2: f64,
    pub seed: u64,
    pub nnz: usize,
    /// nnzgrp for the sparse group penalty, nnzB for the fused one.
    pub nnz_structure: usize,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub wall_seconds: f64,
    pub status: String,
    /// `kkt`, `pdgap` or `vargap`.
    pub criterion: String,
    pub error: f64,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunRecord {
    /// Record for a cell that could not run.
    pub fn failed(problem: &str, solver: &str, penalty: &str, lambda_rule: &str, w1: f64, seed: u64, msg: String) -> Self {
        RunRecord {
            problem: problem.into(),
            solver: solver.into(),
            penalty: penalty.into(),
            lambda_rule: lambda_rule.into(),
            lambda: 0.0,
            w1,
            w2: 1.0 - w1,
            seed,
            nnz: 0,
            nnz_structure: 0,
            outer_iters: 0,
            inner_iters: 0,
            wall_seconds: 0.0,
            status: "error".into(),
            criterion: String::new(),
            error: 0.0,
            objective: 0.0,
            failure: Some(msg),
        }
    }

    pub fn iterations(&self) -> String {
        if self.solver == "ppdna" {
            format!("{}|{}", self.outer_iters, self.inner_iters)
        } else {
            self.outer_iters.to_string()
        }
    }

    /// Error value with its criterion marker: plain, `*` or `#`.
    pub fn error_cell(&self) -> String {
        let mark = match self.criterion.as_str() {
            "pdgap" => "*",
            "vargap" => "#",
            _ => "",
        };
        if self.failure.is_some() {
            return "-".into();
        }
        format!("{}{mark}", format_sci(self.error))
    }
}

/// One decimal and a signed two-digit exponent, e.g. `2.4e-07`.
pub fn format_sci(v: f64) -> String {
    let s = format!("{v:.1e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let (sign, digits) = e.strip_prefix('-').map_or(("+", e), |d| ("-", d));
            format!("{m}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

/// `ss`, `mm:ss` or `h:mm:ss`; anything under half a second prints `00`.
pub fn format_time(seconds: f64) -> String {
    if !(seconds >= 0.5) {
        return "00".into();
    }
    let s = seconds.round() as u64;
    let (h, m, s) = (s / 3600, (s / 60) % 60, s % 60);
    if h > 0 {
        format!("{h}:{m:02}:{s:02}")
    } else if m > 0 {
        format!("{m:02}:{s:02}")
    } else {
        format!("{s:02}")
    }
}

const HEADERS: [&str; 9] = ["problem", "solver", "lambda", "w1", "nnz", "iter", "time", "error", "status"];

fn cells(r: &RunRecord) -> [String; 9] {
    [
        r.problem.clone(),
        r.solver.clone(),
        format!("{:.4}", r.lambda),
        format!("{:.2}", r.w1),
        format!("{}|{}", r.nnz, r.nnz_structure),
        r.iterations(),
        format_time(r.wall_seconds),
        r.error_cell(),
        r.status.clone(),
    ]
}

fn widths(rows: &[[String; 9]]) -> [usize; 9] {
    let mut w = HEADERS.map(|h| h.chars().count());
    for row in rows {
        for (wi, c) in w.iter_mut().zip(row) {
            *wi = (*wi).max(c.chars().count());
        }
    }
    w
}

fn line(cells: &[String], w: &[usize; 9]) -> String {
    let parts: Vec<String> = cells.iter().zip(w).map(|(c, w)| format!("{c:<w$}")).collect();
    parts.join("  ").trim_end().to_string()
}

/// Aligned table with a header line; an empty slice gives the header alone.
pub fn render_table(records: &[RunRecord]) -> String {
    let rows: Vec<[String; 9]> = records.iter().map(cells).collect();
    let w = widths(&rows);
    let mut out = line(&HEADERS.map(String::from), &w);
    out.push('\n');
    for row in &rows {
        out += &line(row, &w);
        out.push('\n');
    }
    out
}

/// The single row `solve` prints.
pub fn render_row(r: &RunRecord) -> String {
    let row = cells(r);
    line(&row, &widths(std::slice::from_ref(&row)))
}
