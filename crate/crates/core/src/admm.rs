//! ADMM baselines: pADMM on the split primal problem and dADMM on the split
//! dual problem. Both use one cached factorization for their linear systems.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::model::{
    evaluate, Dataset, Evaluation, Regularizer, SolveResult, SolverConfig, Status, TerminationInfo,
};
use crate::prox::prox_l2;
use crate::vecops::{axpy, dot, norm2};

/// Which system a right-hand side belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `(I + XᵀX) x = r`, dimension `n`
    Features,
    /// `(I + XXᵀ) x = r`, dimension `N`
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinSolveStrategy {
    /// Cholesky of the requested system itself.
    DirectSmall,
    /// Cholesky of the other (smaller) system plus the Woodbury identity.
    Smw,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
}

/// Solver for `I + XᵀX` and `I + XXᵀ` with a factorization computed once.
pub struct GramSolver<'a> {
    x: &'a Design,
    factor: Option<(Side, Cholesky<f64, Dyn>)>,
    diag_features: Vec<f64>,
    diag_samples: Vec<f64>,
    pcg_tol: f64,
}

fn gram(x: &Design, side: Side) -> DMatrix<f64> {
    let (nr, nc) = (x.nrows(), x.ncols());
    let mut g = match (x, side) {
        (Design::Dense(m), Side::Features) => m.tr_mul(m),
        (Design::Dense(m), Side::Samples) => m * m.transpose(),
        (Design::Sparse(s), Side::Features) => {
            let mut g = DMatrix::zeros(nc, nc);
            let mut dense_col = vec![0.0; nr];
            for j in 0..nc {
                dense_col.iter_mut().for_each(|v| *v = 0.0);
                x.col_axpy(j, 1.0, &mut dense_col);
                for k in j..nc {
                    let (ri, v) = s.column(k);
                    let d: f64 = ri.iter().zip(v).map(|(&i, &a)| a * dense_col[i]).sum();
                    g[(j, k)] = d;
                    g[(k, j)] = d;
                }
            }
            g
        }
        (Design::Sparse(s), Side::Samples) => {
            let mut g = DMatrix::zeros(nr, nr);
            for j in 0..nc {
                let (ri, v) = s.column(j);
                for (&a, &va) in ri.iter().zip(v) {
                    for (&b, &vb) in ri.iter().zip(v) {
                        g[(a, b)] += va * vb;
                    }
                }
            }
            g
        }
    };
    for i in 0..g.nrows() {
        g[(i, i)] += 1.0;
    }
    g
}

impl<'a> GramSolver<'a> {
    /// Factorizes the smaller Gram system when its size is at most
    /// `dense_threshold`; otherwise solves by PCG.
    pub fn new(x: &'a Design, dense_threshold: usize) -> Result<Self> {
        let side = if x.ncols() <= x.nrows() { Side::Features } else { Side::Samples };
        if x.ncols().min(x.nrows()) <= dense_threshold {
            Self::factored(x, side)
        } else {
            Ok(Self::pcg(x, 1e-12))
        }
    }

    /// Factorizes the system of the given side regardless of size.
    pub fn factored(x: &'a Design, side: Side) -> Result<Self> {
        let g = gram(x, side);
        let ch = g
            .cholesky()
            .ok_or(Error::FactorizationFailure("I + Gram is not positive definite"))?;
        Ok(GramSolver {
            x,
            factor: Some((side, ch)),
            diag_features: Vec::new(),
            diag_samples: Vec::new(),
            pcg_tol: 0.0,
        })
    }

    /// Matrix-free solver with relative residual tolerance `tol`.
    pub fn pcg(x: &'a Design, tol: f64) -> Self {
        GramSolver {
            x,
            factor: None,
            diag_features: (0..x.ncols()).map(|j| 1.0 + x.col_sq_norm(j)).collect(),
            diag_samples: x.row_sq_norms().into_iter().map(|v| 1.0 + v).collect(),
            pcg_tol: tol,
        }
    }

    pub fn route(&self, side: Side) -> LinSolveStrategy {
        match &self.factor {
            None => LinSolveStrategy::Pcg,
            Some((s, _)) if *s == side => LinSolveStrategy::DirectSmall,
            Some(_) => LinSolveStrategy::Smw,
        }
    }

    fn apply(&self, side: Side, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        match side {
            Side::Features => axpy(1.0, &self.x.tr_mul(&self.x.mul(v)), &mut out),
            Side::Samples => axpy(1.0, &self.x.mul(&self.x.tr_mul(v)), &mut out),
        }
        out
    }

    fn chol_solve(ch: &Cholesky<f64, Dyn>, rhs: &[f64]) -> Vec<f64> {
        ch.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()
    }

    /// `(I + XᵀX)⁻¹ r` or `(I + XXᵀ)⁻¹ r`.
    pub fn solve(&self, rhs: &[f64], side: Side) -> Vec<f64> {
        match &self.factor {
            Some((s, ch)) if *s == side => Self::chol_solve(ch, rhs),
            Some((_, ch)) => match side {
                // (I + XᵀX)⁻¹ = I − Xᵀ(I + XXᵀ)⁻¹X
                Side::Features => {
                    let t = Self::chol_solve(ch, &self.x.mul(rhs));
                    let mut out = rhs.to_vec();
                    axpy(-1.0, &self.x.tr_mul(&t), &mut out);
                    out
                }
                // (I + XXᵀ)⁻¹ = I − X(I + XᵀX)⁻¹Xᵀ
                Side::Samples => {
                    let t = Self::chol_solve(ch, &self.x.tr_mul(rhs));
                    let mut out = rhs.to_vec();
                    axpy(-1.0, &self.x.mul(&t), &mut out);
                    out
                }
            },
            None => self.pcg_solve(rhs, side),
        }
    }

    fn pcg_solve(&self, rhs: &[f64], side: Side) -> Vec<f64> {
        let diag = match side {
            Side::Features => &self.diag_features,
            Side::Samples => &self.diag_samples,
        };
        let tol = self.pcg_tol * norm2(rhs);
        let dim = rhs.len();
        let mut x = vec![0.0; dim];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..(10 * dim).max(100) {
            if norm2(&r) <= tol {
                break;
            }
            let ap = self.apply(side, &p);
            let alpha = rz / dot(&p, &ap);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            for ((zi, ri), d) in z.iter_mut().zip(&r).zip(diag) {
                *zi = ri / d;
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        x
    }
}

/// `(I + XᵀX)⁻¹r` or `(I + XXᵀ)⁻¹r` with a one-off solver.
pub fn solve_gram_system(x: &Design, rhs: &[f64], side: Side, dense_threshold: usize) -> Result<Vec<f64>> {
    let expected = match side {
        Side::Features => x.ncols(),
        Side::Samples => x.nrows(),
    };
    crate::error::check_len("gram right-hand side", expected, rhs.len())?;
    Ok(GramSolver::new(x, dense_threshold)?.solve(rhs, side))
}

/// Residual balancing of the penalty parameter.
fn adapt_mu(mu: f64, primal: f64, dual: f64) -> f64 {
    let m = if primal > 10.0 * dual {
        mu * 2.0
    } else if dual > 10.0 * primal {
        mu / 2.0
    } else {
        mu
    };
    m.clamp(1e-4, 1e4)
}

fn finish(
    beta: Vec<f64>,
    u: Vec<f64>,
    eval: Evaluation,
    status: Status,
    iters: usize,
    start: Instant,
) -> SolveResult {
    SolveResult {
        beta,
        residual_y: eval.residual,
        dual_u: u,
        status,
        criterion: eval.report,
        outer_iters: iters,
        inner_iters: 0,
        objective_primal: eval.primal,
        objective_dual: eval.dual,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

fn check_stop(eval: &Evaluation, cfg: &SolverConfig, iters: usize, start: Instant) -> Option<Status> {
    if eval.report.value <= cfg.tol {
        Some(if eval.zero_residual { Status::Overfit } else { Status::Converged })
    } else if start.elapsed().as_secs_f64() >= cfg.max_time_seconds {
        Some(Status::TimeLimit)
    } else if iters >= cfg.admm_max_iters {
        Some(Status::MaxIterations)
    } else {
        None
    }
}

/// State of pADMM, exposed for warm starts.
#[derive(Debug, Clone, PartialEq)]
pub struct PadmmState {
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PadmmState {
    pub fn zeros(ds: &Dataset) -> Self {
        let (nr, nc) = (ds.n_samples(), ds.n_features());
        PadmmState {
            beta: vec![0.0; nc],
            y: vec![0.0; nr],
            alpha: vec![0.0; nc],
            u: vec![0.0; nr],
            xi: vec![0.0; nc],
        }
    }
}

/// One pADMM sweep with penalty `μ`.
pub fn padmm_step(
    ds: &Dataset,
    reg: &Regularizer,
    lambda: f64,
    mu: f64,
    rho: f64,
    gs: &GramSolver<'_>,
    s: &mut PadmmState,
) {
    let x = &ds.x;
    let t: Vec<f64> = ds
        .y
        .iter()
        .zip(&s.y)
        .zip(&s.u)
        .map(|((a, b), c)| a + b - c / mu)
        .collect();
    let mut rhs = x.tr_mul(&t);
    for ((r, a), xi) in rhs.iter_mut().zip(&s.alpha).zip(&s.xi) {
        *r += a - xi / mu;
    }
    s.beta = gs.solve(&rhs, Side::Features);
    let xb = x.mul(&s.beta);
    let w: Vec<f64> = xb
        .iter()
        .zip(&ds.y)
        .zip(&s.u)
        .map(|((a, b), c)| a - b + c / mu)
        .collect();
    s.y = prox_l2(&w, 1.0 / mu);
    let w: Vec<f64> = s.beta.iter().zip(&s.xi).map(|(b, xi)| b + xi / mu).collect();
    s.alpha = reg.prox(&w, lambda / mu);
    for (i, ui) in s.u.iter_mut().enumerate() {
        *ui += rho * mu * (xb[i] - ds.y[i] - s.y[i]);
    }
    for (i, xi) in s.xi.iter_mut().enumerate() {
        *xi += rho * mu * (s.beta[i] - s.alpha[i]);
    }
}

/// pADMM on `min ‖y‖ + λp(α)` s.t. `Xβ − Y = y`, `β = α`.
pub fn padmm_solve(ds: &Dataset, reg: &Regularizer, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    reg.check_dim(ds.n_features())?;
    let start = Instant::now();
    let gs = GramSolver::new(&ds.x, cfg.gram_dense_threshold)?;
    let mut s = PadmmState::zeros(ds);
    let mut mu = cfg.admm_mu;
    let mut next_adapt = cfg.admm_adapt_every;
    let mut it = 0;
    loop {
        let (y_old, a_old) = (s.y.clone(), s.alpha.clone());
        padmm_step(ds, reg, cfg.lambda, mu, cfg.admm_rho, &gs, &mut s);
        it += 1;
        // α carries the exact sparsity pattern of the penalty
        let eval = evaluate(
            ds,
            reg,
            cfg.lambda,
            &s.alpha,
            TerminationInfo {
                dual: Some(&s.u),
                previous: Some(&a_old),
                overfit_tol: cfg.overfit_tol,
            },
        );
        if let Some(st) = check_stop(&eval, cfg, it, start) {
            return Ok(finish(s.alpha, s.u, eval, st, it, start));
        }
        if next_adapt > 0 && it == next_adapt {
            next_adapt *= 2;
            let xb = ds.x.mul(&s.beta);
            let rp1: f64 = (0..xb.len()).map(|i| (xb[i] - ds.y[i] - s.y[i]).powi(2)).sum();
            let rp2: f64 = s.beta.iter().zip(&s.alpha).map(|(b, a)| (b - a).powi(2)).sum();
            let dy: Vec<f64> = s.y.iter().zip(&y_old).map(|(a, b)| a - b).collect();
            let mut dd = ds.x.tr_mul(&dy);
            for ((d, a), b) in dd.iter_mut().zip(&s.alpha).zip(&a_old) {
                *d += a - b;
            }
            mu = adapt_mu(mu, (rp1 + rp2).sqrt(), mu * norm2(&dd));
        }
    }
}

/// State of dADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct DadmmState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
}

impl DadmmState {
    pub fn zeros(ds: &Dataset) -> Self {
        let (nr, nc) = (ds.n_samples(), ds.n_features());
        DadmmState {
            u: vec![0.0; nr],
            v: vec![0.0; nc],
            x: vec![0.0; nr],
            beta: vec![0.0; nc],
            y: vec![0.0; nr],
        }
    }
}

/// `Π_ℬ(x)`, projection onto the unit Euclidean ball.
pub fn project_unit_ball(x: &[f64]) -> Vec<f64> {
    let n = norm2(x);
    if n <= 1.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

/// `prox_{μ⁻¹(λp)*}(z) = z − μ⁻¹ prox_{μλp}(μz)`
pub fn prox_conjugate_penalty(reg: &Regularizer, lambda: f64, mu: f64, z: &[f64]) -> Vec<f64> {
    let mz: Vec<f64> = z.iter().map(|v| mu * v).collect();
    let p = reg.prox(&mz, mu * lambda);
    z.iter().zip(&p).map(|(a, b)| a - b / mu).collect()
}

/// One dADMM sweep with penalty `μ`.
pub fn dadmm_step(
    ds: &Dataset,
    reg: &Regularizer,
    lambda: f64,
    mu: f64,
    rho: f64,
    gs: &GramSolver<'_>,
    s: &mut DadmmState,
) {
    let x = &ds.x;
    let t: Vec<f64> = s.beta.iter().zip(&s.v).map(|(b, v)| b / mu - v).collect();
    let mut rhs = x.mul(&t);
    for (((r, yd), y), xv) in rhs.iter_mut().zip(&ds.y).zip(&s.y).zip(&s.x) {
        *r += -yd / mu - (y / mu - xv);
    }
    s.u = gs.solve(&rhs, Side::Samples);
    let xtu = x.tr_mul(&s.u);
    let z: Vec<f64> = xtu.iter().zip(&s.beta).map(|(a, b)| -a + b / mu).collect();
    s.v = prox_conjugate_penalty(reg, lambda, mu, &z);
    let w: Vec<f64> = s.u.iter().zip(&s.y).map(|(u, y)| u + y / mu).collect();
    s.x = project_unit_ball(&w);
    for (i, b) in s.beta.iter_mut().enumerate() {
        *b += rho * mu * (-xtu[i] - s.v[i]);
    }
    for (i, y) in s.y.iter_mut().enumerate() {
        *y += rho * mu * (s.u[i] - s.x[i]);
    }
}

/// dADMM on `min ⟨Y, u⟩ + (λp)*(v) + δ_ℬ(x)` s.t. `Xᵀu + v = 0`, `u = x`; the
/// primal estimate is the multiplier `β`.
pub fn dadmm_solve(ds: &Dataset, reg: &Regularizer, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    reg.check_dim(ds.n_features())?;
    let start = Instant::now();
    let gs = GramSolver::new(&ds.x, cfg.gram_dense_threshold)?;
    let mut s = DadmmState::zeros(ds);
    let mut mu = cfg.admm_mu;
    let mut next_adapt = cfg.admm_adapt_every;
    let mut it = 0;
    loop {
        let (v_old, x_old, b_old) = (s.v.clone(), s.x.clone(), s.beta.clone());
        dadmm_step(ds, reg, cfg.lambda, mu, cfg.admm_rho, &gs, &mut s);
        it += 1;
        let eval = evaluate(
            ds,
            reg,
            cfg.lambda,
            &s.beta,
            TerminationInfo {
                dual: Some(&s.u),
                previous: Some(&b_old),
                overfit_tol: cfg.overfit_tol,
            },
        );
        if let Some(st) = check_stop(&eval, cfg, it, start) {
            return Ok(finish(s.beta, s.u, eval, st, it, start));
        }
        if next_adapt > 0 && it == next_adapt {
            next_adapt *= 2;
            let xtu = ds.x.tr_mul(&s.u);
            let rp1: f64 = xtu.iter().zip(&s.v).map(|(a, b)| (a + b).powi(2)).sum();
            let rp2: f64 = s.u.iter().zip(&s.x).map(|(a, b)| (a - b).powi(2)).sum();
            let dv: Vec<f64> = s.v.iter().zip(&v_old).map(|(a, b)| a - b).collect();
            let mut dd = ds.x.mul(&dv);
            for ((d, a), b) in dd.iter_mut().zip(&s.x).zip(&x_old) {
                *d -= a - b;
            }
            mu = adapt_mu(mu, (rp1 + rp2).sqrt(), mu * norm2(&dd));
        }
    }
}
