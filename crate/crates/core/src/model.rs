//! Regression instances, penalties, solver configuration and result types.

use crate::design::Design;
use crate::error::{check_len, Error, Result};
use crate::prox;
use crate::vecops::{dot, norm1, norm2};

/// A regression instance `(X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Design,
    pub y: Vec<f64>,
    pub normalized: bool,
}

impl Dataset {
    pub fn new(x: impl Into<Design>, y: Vec<f64>) -> Result<Self> {
        let x = x.into();
        check_len("response length", x.nrows(), y.len())?;
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            x,
            y,
            normalized: false,
        })
    }

    /// Number of samples `N`.
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    /// Number of features `n`.
    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Indices of identically zero columns.
    pub fn zero_columns(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&j| self.x.col_sq_norm(j) == 0.0)
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            normalized: self.normalized,
        }
    }
}

/// Rescales columns so that every diagonal entry of `XᵀX / N` equals one.
pub fn normalize_columns(ds: &Dataset) -> Result<Dataset> {
    let nn = ds.n_samples() as f64;
    let mut d = Vec::with_capacity(ds.n_features());
    for j in 0..ds.n_features() {
        let s = ds.x.col_sq_norm(j);
        if s == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        let dj = (nn / s).sqrt();
        // leaves already-normalized columns bit-identical
        d.push(if (dj - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { dj });
    }
    let mut x = ds.x.clone();
    x.scale_columns(&d);
    Ok(Dataset {
        x,
        y: ds.y.clone(),
        normalized: true,
    })
}

/// Partition of the features into weighted groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    n: usize,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        check_len("group weights", groups.len(), weights.len())?;
        let n: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidGroups("empty group".into()));
            }
            for &i in g {
                if i >= n || seen[i] {
                    return Err(Error::InvalidGroups(format!(
                        "index {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidGroups(format!("non-positive weight {w}")));
        }
        Ok(GroupStructure { groups, weights, n })
    }

    /// Groups with the default weights `ω_l = √|G_l|`.
    pub fn with_size_weights(groups: Vec<Vec<usize>>) -> Result<Self> {
        let w = groups.iter().map(|g| (g.len() as f64).sqrt()).collect();
        Self::new(groups, w)
    }

    /// Groups of `size` consecutive features.
    pub fn contiguous(n: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidGroups("group size 0".into()));
        }
        let groups = (0..n)
            .step_by(size)
            .map(|s| (s..(s + size).min(n)).collect())
            .collect();
        Self::with_size_weights(groups)
    }

    /// Groups from a label per feature; labels need not be contiguous.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut order: Vec<usize> = labels.to_vec();
        order.sort_unstable();
        order.dedup();
        let mut groups = vec![Vec::new(); order.len()];
        for (i, l) in labels.iter().enumerate() {
            let k = order.binary_search(l).unwrap();
            groups[k].push(i);
        }
        Self::with_size_weights(groups)
    }

    /// A single group containing every feature.
    pub fn single(n: usize) -> Result<Self> {
        Self::with_size_weights(vec![(0..n).collect()])
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.groups
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    SparseGroup(GroupStructure),
    Fused,
}

/// `p(β) = w1‖β‖₁ + w2 Σ ω_l‖β_{G_l}‖` or `p(β) = w1‖β‖₁ + w2‖Bβ‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    pub kind: Penalty,
    pub w1: f64,
    pub w2: f64,
}

impl Regularizer {
    pub fn new(kind: Penalty, w1: f64, w2: f64) -> Result<Self> {
        if !(w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0 && (w1 + w2).is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights must be nonnegative with positive sum, got ({w1}, {w2})"
            )));
        }
        Ok(Regularizer { kind, w1, w2 })
    }

    pub fn sparse_group(groups: GroupStructure, w1: f64, w2: f64) -> Result<Self> {
        Self::new(Penalty::SparseGroup(groups), w1, w2)
    }

    pub fn fused(w1: f64, w2: f64) -> Result<Self> {
        Self::new(Penalty::Fused, w1, w2)
    }

    pub fn groups(&self) -> Option<&GroupStructure> {
        match &self.kind {
            Penalty::SparseGroup(g) => Some(g),
            Penalty::Fused => None,
        }
    }

    /// Checks that `β` has the length this penalty expects.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match &self.kind {
            Penalty::SparseGroup(g) => check_len("penalty dimension", g.n_features(), n),
            Penalty::Fused => Ok(()),
        }
    }

    /// `p(β)`; panics on a length mismatch (see [`penalty_value`]).
    pub fn value(&self, beta: &[f64]) -> f64 {
        let mut v = 0.0;
        if self.w1 > 0.0 {
            v += self.w1 * norm1(beta);
        }
        if self.w2 > 0.0 {
            v += self.w2
                * match &self.kind {
                    Penalty::SparseGroup(g) => {
                        assert_eq!(g.n_features(), beta.len());
                        g.iter()
                            .map(|(idx, w)| w * idx.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt())
                            .sum::<f64>()
                    }
                    Penalty::Fused => beta.windows(2).map(|p| (p[0] - p[1]).abs()).sum::<f64>(),
                };
        }
        v
    }

    /// `prox_{κp}(x)`
    pub fn prox(&self, x: &[f64], kappa: f64) -> Vec<f64> {
        match &self.kind {
            Penalty::SparseGroup(g) => prox::prox_sparse_group_with(x, g, self.w1, self.w2, kappa),
            Penalty::Fused => prox::prox_fused_with(x, self.w1, self.w2, kappa),
        }
    }
}

/// `p(β)` with dimension checking.
pub fn penalty_value(reg: &Regularizer, beta: &[f64]) -> Result<f64> {
    reg.check_dim(beta.len())?;
    Ok(reg.value(beta))
}

/// 0.999-mass estimate of the number of nonzero entries.
pub fn nnz_estimate(v: &[f64]) -> usize {
    let total = norm1(v);
    if total == 0.0 {
        return 0;
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let target = 0.999 * total;
    let mut acc = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        acc += v[i].abs();
        if acc >= target {
            return k + 1;
        }
    }
    v.len()
}

/// `(nnz, nnzgrp)` for sparse-group penalties, `(nnz, nnzB)` for fused ones.
pub fn nnz_stats(beta: &[f64], reg: &Regularizer) -> (usize, usize) {
    let second = match &reg.kind {
        Penalty::SparseGroup(g) => {
            let norms: Vec<f64> = g
                .groups()
                .iter()
                .map(|idx| idx.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt())
                .collect();
            nnz_estimate(&norms)
        }
        Penalty::Fused => {
            let diffs: Vec<f64> = beta.windows(2).map(|p| p[0] - p[1]).collect();
            nnz_estimate(&diffs)
        }
    };
    (nnz_estimate(beta), second)
}

/// Which termination measure a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    Kkt,
    PdGap,
    VarGap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KKTReport {
    pub kind: CriterionKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    TimeLimit,
    /// Terminated on the zero-residual branch.
    Overfit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::TimeLimit => "time_limit",
            Status::Overfit => "overfit",
        }
    }

    /// True for caps that stopped the solver before the tolerance was met.
    pub fn is_cap(self) -> bool {
        matches!(self, Status::MaxIterations | Status::TimeLimit)
    }
}

/// Solver parameters. Construct with [`SolverConfig::new`] and override fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub tol: f64,
    pub max_outer: usize,
    /// Cap on the summed SSN iterations over all subproblems.
    pub max_inner_total: usize,
    /// Cap on SSN iterations per subproblem.
    pub max_inner: usize,
    pub max_time_seconds: f64,
    pub sigma0: f64,
    pub tau0: f64,
    pub sigma_floor: f64,
    pub tau_floor: f64,
    /// Geometric factor applied to σ and τ after every outer step.
    pub decay: f64,
    pub ssn_eta: f64,
    pub ssn_varrho: f64,
    pub ls_rho: f64,
    pub ls_mu: f64,
    /// Scale `c₀` of the inner tolerance schedule.
    pub inner_tol_c0: f64,
    /// Warm-start each subproblem from the previous dual iterate.
    pub warm_start: bool,
    /// Newton systems with `N` at most this size are factorized densely.
    pub dense_threshold: usize,
    pub cg_max_iters: usize,
    pub damping: f64,
    pub admm_mu: f64,
    pub admm_rho: f64,
    pub admm_max_iters: usize,
    /// First residual-balancing check of μ; later checks happen at doubling
    /// iteration counts (0 disables).
    pub admm_adapt_every: usize,
    /// Gram systems with `min(N, n)` above this size use PCG.
    pub gram_dense_threshold: usize,
    /// `‖Xβ − Y‖ ≤ overfit_tol·(1 + ‖Y‖)` is treated as a zero residual.
    pub overfit_tol: f64,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            tol: 1e-7,
            max_outer: 100,
            max_inner_total: 5000,
            max_inner: 50,
            max_time_seconds: 1800.0,
            sigma0: 1.0,
            tau0: 1.0,
            sigma_floor: 1e-4,
            tau_floor: 1e-4,
            decay: 0.7,
            ssn_eta: 0.1,
            ssn_varrho: 0.5,
            ls_rho: 0.5,
            ls_mu: 1e-4,
            inner_tol_c0: 1e-2,
            warm_start: true,
            dense_threshold: 500,
            cg_max_iters: 300,
            damping: 1e-12,
            admm_mu: 1.0,
            admm_rho: 1.618,
            admm_max_iters: 1_000_000,
            admm_adapt_every: 50,
            gram_dense_threshold: 4000,
            overfit_tol: 1e-9,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Err(Error::InvalidParameter(format!("{name} = {v}")));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda);
        }
        if !(self.tol > 0.0) {
            return bad("tol", self.tol);
        }
        if !(self.max_time_seconds > 0.0) {
            return bad("max_time_seconds", self.max_time_seconds);
        }
        for (name, v) in [
            ("sigma0", self.sigma0),
            ("tau0", self.tau0),
            ("sigma_floor", self.sigma_floor),
            ("tau_floor", self.tau_floor),
            ("admm_mu", self.admm_mu),
            ("inner_tol_c0", self.inner_tol_c0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, v);
            }
        }
        for (name, v) in [
            ("ssn_eta", self.ssn_eta),
            ("ls_rho", self.ls_rho),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(name, v);
            }
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay", self.decay);
        }
        if !(self.ssn_varrho > 0.0 && self.ssn_varrho <= 1.0) {
            return bad("ssn_varrho", self.ssn_varrho);
        }
        if !(self.ls_mu > 0.0 && self.ls_mu < 0.5) {
            return bad("ls_mu", self.ls_mu);
        }
        if !(self.admm_rho > 0.0 && self.admm_rho < (1.0 + 5f64.sqrt()) / 2.0) {
            return bad("admm_rho", self.admm_rho);
        }
        if !(self.damping >= 0.0) {
            return bad("damping", self.damping);
        }
        if !(self.overfit_tol >= 0.0) {
            return bad("overfit_tol", self.overfit_tol);
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.admm_max_iters == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub beta: Vec<f64>,
    /// `Xβ − Y` at exit.
    pub residual_y: Vec<f64>,
    /// Dual iterate `u` paired with `beta`.
    pub dual_u: Vec<f64>,
    pub status: Status,
    pub criterion: KKTReport,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub objective_primal: f64,
    pub objective_dual: f64,
    pub wall_seconds: f64,
}

/// `‖Xβ − Y‖ + λp(β)`
pub fn primal_objective(ds: &Dataset, reg: &Regularizer, lambda: f64, beta: &[f64]) -> f64 {
    let r = crate::vecops::sub(&ds.x.mul(beta), &ds.y);
    norm2(&r) + lambda * reg.value(beta)
}

/// Dual objective `−⟨Y, u⟩` after scaling `u` into the dual feasible set.
/// Returns the trivial bound 0 when no scaling is feasible, which happens for
/// the pure fused penalty unless `Σ(Xᵀu)` vanishes exactly.
pub fn dual_objective(ds: &Dataset, reg: &Regularizer, lambda: f64, u: &[f64]) -> f64 {
    let xtu = ds.x.tr_mul(u);
    let pstar = crate::dro::dual_norm_general(&xtu, reg);
    let s = 1f64.max(norm2(u)).max(pstar / lambda);
    if !s.is_finite() {
        return 0.0;
    }
    -dot(&ds.y, u) / s
}

/// `Δ_kkt` at `β` given the residual `r = Xβ − Y` with `r ≠ 0`.
pub fn kkt_value(ds: &Dataset, reg: &Regularizer, lambda: f64, beta: &[f64], r: &[f64]) -> f64 {
    let nr = norm2(r);
    let bbar: Vec<f64> = ds.x.tr_mul(r).into_iter().map(|v| v / nr).collect();
    let shifted = crate::vecops::sub(beta, &bbar);
    let p = reg.prox(&shifted, lambda);
    crate::vecops::dist2(beta, &p) / (1.0 + norm2(beta) + norm2(&bbar))
}

/// Termination measure at `β` with whatever auxiliary information is known.
#[derive(Debug, Clone, Copy, Default)]
pub struct TerminationInfo<'a> {
    pub dual: Option<&'a [f64]>,
    pub previous: Option<&'a [f64]>,
    pub overfit_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub report: KKTReport,
    pub residual: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub zero_residual: bool,
}

pub(crate) fn evaluate(
    ds: &Dataset,
    reg: &Regularizer,
    lambda: f64,
    beta: &[f64],
    info: TerminationInfo<'_>,
) -> Evaluation {
    let r = crate::vecops::sub(&ds.x.mul(beta), &ds.y);
    let nr = norm2(&r);
    let primal = nr + lambda * reg.value(beta);
    let dual = info.dual.map(|u| dual_objective(ds, reg, lambda, u));
    let zero_residual = nr <= info.overfit_tol * (1.0 + norm2(&ds.y));
    let report = if !zero_residual {
        KKTReport {
            kind: CriterionKind::Kkt,
            value: kkt_value(ds, reg, lambda, beta, &r),
        }
    } else if let Some(d) = dual {
        KKTReport {
            kind: CriterionKind::PdGap,
            value: ((primal - d) / (1.0 + primal.abs() + d.abs())).max(0.0),
        }
    } else if let Some(prev) = info.previous {
        KKTReport {
            kind: CriterionKind::VarGap,
            value: crate::vecops::dist2(beta, prev) / (1.0 + norm2(beta) + norm2(prev)),
        }
    } else {
        // u = 0 is always dual feasible with objective 0
        KKTReport {
            kind: CriterionKind::PdGap,
            value: primal / (1.0 + primal),
        }
    };
    Evaluation {
        report,
        residual: r,
        primal,
        dual: dual.unwrap_or(f64::NAN),
        zero_residual,
    }
}

/// Relative KKT residual of `β`; falls back to the duality gap with the trivial
/// dual point when `Xβ = Y` exactly.
pub fn kkt_residual(ds: &Dataset, reg: &Regularizer, lambda: f64, beta: &[f64]) -> KKTReport {
    kkt_residual_with(ds, reg, lambda, beta, TerminationInfo::default())
}

pub fn kkt_residual_with(
    ds: &Dataset,
    reg: &Regularizer,
    lambda: f64,
    beta: &[f64],
    info: TerminationInfo<'_>,
) -> KKTReport {
    evaluate(ds, reg, lambda, beta, info).report
}
