//! One solve: choose `λ`, build the penalty, run a solver, summarize.

use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sqrtreg::admm::{dadmm_solve, padmm_solve};
use sqrtreg::tuning::{cross_validate, CvGrid, LambdaRule, PenaltyFamily, Rule};
use sqrtreg::{nnz_stats, ppa_solve, CriterionKind, Regularizer, SolveResult, SolverConfig};

use crate::error::{CliError, Result};
use crate::problem::Problem;
use crate::record::RunRecord;

pub const CV_FOLDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Ppdna,
    Padmm,
    Dadmm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Ppdna => "ppdna",
            SolverKind::Padmm => "padmm",
            SolverKind::Dadmm => "dadmm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Sgl,
    Fused,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Sgl => "sgl",
            PenaltyKind::Fused => "fused",
        }
    }
}

/// `--lambda`: a number, a rule name, or `cv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Value(f64),
    Rule(Rule),
    Cv,
}

impl LambdaChoice {
    pub fn label(&self) -> String {
        match self {
            LambdaChoice::Value(v) => format!("{v}"),
            LambdaChoice::Rule(r) => format!("{r:?}").to_ascii_lowercase(),
            LambdaChoice::Cv => "cv".into(),
        }
    }
}

impl FromStr for LambdaChoice {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(LambdaChoice::Cv);
        }
        if let Ok(v) = s.parse::<f64>() {
            if v > 0.0 && v.is_finite() {
                return Ok(LambdaChoice::Value(v));
            }
            return Err(CliError::Usage(format!("lambda must be positive and finite, got {s}")));
        }
        s.parse::<Rule>()
            .map(LambdaChoice::Rule)
            .map_err(|_| CliError::Usage(format!("--lambda expects a number, a rule (bel, sts, bls, bun, stg, blg, jia) or cv, got {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub solver: SolverKind,
    pub penalty: PenaltyKind,
    pub w1: f64,
    pub lambda: LambdaChoice,
    /// Also tune `w1` over `{0, 0.1, …, 1}` when `lambda` is `cv`.
    pub cv_w1: bool,
    pub seed: u64,
    pub tol: f64,
    pub max_time: f64,
}

pub struct Outcome {
    pub record: RunRecord,
    pub result: SolveResult,
}

fn family(problem: &Problem, penalty: PenaltyKind) -> PenaltyFamily {
    match penalty {
        PenaltyKind::Sgl => PenaltyFamily::SparseGroup(problem.groups.clone()),
        PenaltyKind::Fused => PenaltyFamily::Fused,
    }
}

fn config(cell: &Cell, lambda: f64) -> SolverConfig {
    let mut cfg = SolverConfig::new(lambda).with_tol(cell.tol);
    cfg.max_time_seconds = cell.max_time;
    cfg
}

pub fn run(problem: &Problem, cell: &Cell) -> Result<Outcome> {
    if !(0.0..=1.0).contains(&cell.w1) {
        return Err(CliError::Usage(format!("--w1 must lie in [0, 1], got {}", cell.w1)));
    }
    let fam = family(problem, cell.penalty);
    let ds = &problem.dataset;
    let (lambda, w1) = match cell.lambda {
        LambdaChoice::Value(v) => (v, cell.w1),
        LambdaChoice::Rule(r) => {
            let rule = LambdaRule { seed: cell.seed, ..LambdaRule::new(r) };
            (rule.compute(ds, Some(&problem.groups))?, cell.w1)
        }
        LambdaChoice::Cv => {
            let grid = if cell.cv_w1 { CvGrid::full() } else { CvGrid::lambdas_only(cell.w1) };
            let cv = cross_validate(ds, &fam, &grid, CV_FOLDS, cell.seed, &config(cell, 1.0))?;
            (cv.best.lambda, cv.best.w1)
        }
    };
    let reg: Regularizer = fam.regularizer(w1)?;
    let cfg = config(cell, lambda);
    let result = match cell.solver {
        SolverKind::Ppdna => ppa_solve(ds, &reg, &cfg)?,
        SolverKind::Padmm => padmm_solve(ds, &reg, &cfg)?,
        SolverKind::Dadmm => dadmm_solve(ds, &reg, &cfg)?,
    };
    let (nnz, nnz_structure) = nnz_stats(&result.beta, &reg);
    let record = RunRecord {
        problem: problem.id.clone(),
        solver: cell.solver.name().into(),
        penalty: cell.penalty.name().into(),
        lambda_rule: cell.lambda.label(),
        lambda,
        w1: reg.w1,
        w2: reg.w2,
        seed: cell.seed,
        nnz,
        nnz_structure,
        outer_iters: result.outer_iters,
        inner_iters: result.inner_iters,
        wall_seconds: result.wall_seconds,
        status: result.status.as_str().into(),
        criterion: match result.criterion.kind {
            CriterionKind::Kkt => "kkt",
            CriterionKind::PdGap => "pdgap",
            CriterionKind::VarGap => "vargap",
        }
        .into(),
        error: result.criterion.value,
        objective: result.objective_primal,
        failure: None,
    };
    Ok(Outcome { record, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build, Source};

    #[test]
    fn lambda_choices() {
        assert_eq!("2.5".parse::<LambdaChoice>().unwrap(), LambdaChoice::Value(2.5));
        assert_eq!("CV".parse::<LambdaChoice>().unwrap(), LambdaChoice::Cv);
        assert_eq!("StG".parse::<LambdaChoice>().unwrap(), LambdaChoice::Rule(Rule::StG));
        assert!("-1".parse::<LambdaChoice>().is_err());
        assert!("nan".parse::<LambdaChoice>().is_err());
        assert!("huge".parse::<LambdaChoice>().is_err());
        assert_eq!(LambdaChoice::Rule(Rule::BlG).label(), "blg");
    }

    #[test]
    fn small_example_recovers_groups() {
        let p = build(&"ex1:200:40".parse::<Source>().unwrap(), 0, true, None).unwrap();
        let cell = Cell {
            solver: SolverKind::Ppdna,
            penalty: PenaltyKind::Sgl,
            w1: 0.0,
            lambda: LambdaChoice::Rule(Rule::Bun),
            cv_w1: false,
            seed: 0,
            tol: 1e-6,
            max_time: 60.0,
        };
        let out = run(&p, &cell).unwrap();
        assert_eq!(out.record.status, "converged");
        assert_eq!(out.record.nnz_structure, 3);
        assert!(out.record.error <= 1e-6);
    }
}
