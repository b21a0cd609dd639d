//! Proximal point method on the primal problem whose subproblems are solved
//! through their smooth duals by a semismooth Newton method.
//!
//! Subproblem `k` minimizes over `(β, y)`
//!
//! ```text
//! ‖y‖ + λp(β) + σ/2‖β − βᵏ‖² + τ/2‖y − yᵏ‖²   s.t.  Xβ − Y = y
//! ```
//!
//! and its dual is `min_u Ψ(u)`, with `Ψ` convex and `C¹`. The primal iterate is
//! recovered from the dual one by the two proximal maps.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{evaluate, Dataset, Regularizer, SolveResult, SolverConfig, Status, TerminationInfo};
use crate::prox::{moreau_envelope, prox_l2, JacobianElement, NormTerm};
use crate::vecops::{axpy, dist2, dot, norm2};

/// Data of one dual subproblem.
#[derive(Debug, Clone, Copy)]
pub struct DualSubproblem<'a> {
    pub ds: &'a Dataset,
    pub reg: &'a Regularizer,
    pub lambda: f64,
    pub sigma: f64,
    pub tau: f64,
    pub beta_k: &'a [f64],
    pub y_k: &'a [f64],
}

/// Everything computed while evaluating `Ψ` at a point.
#[derive(Debug, Clone)]
pub struct PsiEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// `prox_{λ/σ p}(β̃)`
    pub beta: Vec<f64>,
    /// `prox_{1/τ ‖·‖}(ỹ)`
    pub y: Vec<f64>,
    /// `β̃ = βᵏ − Xᵀu/σ`
    pub beta_tilde: Vec<f64>,
    /// `ỹ = yᵏ + u/τ`
    pub y_tilde: Vec<f64>,
}

impl<'a> DualSubproblem<'a> {
    pub fn evaluate(&self, u: &[f64]) -> PsiEval {
        let ds = self.ds;
        let xtu = ds.x.tr_mul(u);
        let beta_tilde: Vec<f64> = self
            .beta_k
            .iter()
            .zip(&xtu)
            .map(|(b, v)| b - v / self.sigma)
            .collect();
        let beta = self.reg.prox(&beta_tilde, self.lambda / self.sigma);
        let y_tilde: Vec<f64> = self
            .y_k
            .iter()
            .zip(u)
            .map(|(y, v)| y + v / self.tau)
            .collect();
        let y = prox_l2(&y_tilde, 1.0 / self.tau);
        let xb = ds.x.mul(&beta);
        // constraint violation Xβ̂ − Y − ŷ
        let viol: Vec<f64> = xb
            .iter()
            .zip(&ds.y)
            .zip(&y)
            .map(|((a, b), c)| a - b - c)
            .collect();
        let db = dist2(&beta, self.beta_k);
        let dy = dist2(&y, self.y_k);
        // −Ψ(u) is the Lagrangian at its minimizer (β̂, ŷ); this form avoids
        // cancelling the large ‖Xᵀu‖²/σ terms of the envelope expression.
        let lagr = norm2(&y)
            + self.lambda * self.reg.value(&beta)
            + 0.5 * self.sigma * db * db
            + 0.5 * self.tau * dy * dy
            + dot(u, &viol);
        let grad = viol.iter().map(|v| -v).collect();
        PsiEval {
            value: -lagr,
            grad,
            beta,
            y,
            beta_tilde,
            y_tilde,
        }
    }

    /// `Ψ(u)` written with Moreau envelopes, term by term.
    pub fn psi_value_envelope(&self, u: &[f64]) -> f64 {
        let xtu = self.ds.x.tr_mul(u);
        let xb = self.ds.x.mul(self.beta_k);
        let c: Vec<f64> = xb
            .iter()
            .zip(self.y_k)
            .zip(&self.ds.y)
            .map(|((a, b), y)| a - b - y)
            .collect();
        let bt: Vec<f64> = self.beta_k.iter().zip(&xtu).map(|(b, v)| b - v / self.sigma).collect();
        let yt: Vec<f64> = self.y_k.iter().zip(u).map(|(y, v)| y + v / self.tau).collect();
        dot(u, u) / (2.0 * self.tau) + dot(&xtu, &xtu) / (2.0 * self.sigma) - dot(u, &c)
            - self.sigma * moreau_envelope(NormTerm::Penalty(self.reg, self.lambda / self.sigma), &bt)
            - self.tau * moreau_envelope(NormTerm::L2(1.0 / self.tau), &yt)
    }

    pub fn jacobian(&self, e: &PsiEval) -> JacobianElement {
        JacobianElement::new(
            &self.ds.x,
            &e.beta_tilde,
            &e.y_tilde,
            self.reg,
            self.lambda,
            self.sigma,
            self.tau,
        )
    }
}

/// `Ψ(u)`
pub fn psi_value(sub: &DualSubproblem<'_>, u: &[f64]) -> f64 {
    sub.evaluate(u).value
}

/// `∇Ψ(u)` together with the primal candidates `(β̂, ŷ)`.
pub fn psi_gradient(sub: &DualSubproblem<'_>, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let e = sub.evaluate(u);
    (e.grad, e.beta, e.y)
}

/// Result of one semismooth Newton run.
#[derive(Debug, Clone)]
pub struct SsnOutput {
    pub u: Vec<f64>,
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    pub iters: usize,
    pub grad_norm: f64,
    /// Line searches that underflowed and fell back to a gradient step.
    pub stalls: usize,
    /// `‖∇Ψ‖` at every iterate, starting with `u0`.
    pub grad_history: Vec<f64>,
}

/// Solves `H d = −g` to the inexactness `min(η, ‖g‖^{1+ϱ})`.
pub fn newton_direction(
    jac: &JacobianElement,
    sub: &DualSubproblem<'_>,
    g: &[f64],
    cfg: &SolverConfig,
) -> Vec<f64> {
    let x = &sub.ds.x;
    let ng = norm2(g);
    if jac.is_zero() {
        // Ψ is locally linear: move a unit distance downhill
        return g.iter().map(|v| -v / ng.max(f64::MIN_POSITIVE)).collect();
    }
    let nr = g.len();
    let tol = cfg.ssn_eta.min(ng.powf(1.0 + cfg.ssn_varrho));
    let shift = cfg.damping * jac.trace(x) / nr as f64;
    if nr <= cfg.dense_threshold {
        let h = jac.dense(x);
        if let Some(d) = dense_solve(h, g, shift) {
            return d;
        }
    }
    conjugate_gradient(|v| jac.apply(x, v), g, shift, tol, cfg.cg_max_iters)
}

fn dense_solve(mut h: DMatrix<f64>, g: &[f64], shift: f64) -> Option<Vec<f64>> {
    let nr = g.len();
    let scale = (0..nr).map(|i| h[(i, i)]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let rhs = nalgebra::DVector::from_iterator(nr, g.iter().map(|v| -v));
    let mut s = shift;
    for _ in 0..8 {
        if s > 0.0 {
            for i in 0..nr {
                h[(i, i)] += s;
            }
        }
        if let Some(ch) = h.clone().cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.as_slice().to_vec());
            }
        }
        let next = if s == 0.0 { 1e-14 * scale } else { s * 100.0 };
        for i in 0..nr {
            h[(i, i)] -= s;
        }
        s = next;
    }
    None
}

/// CG on `(A + shift·I) d = −g`; stops on residual `tol`, non-positive
/// curvature, or the iteration cap.
fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    g: &[f64],
    shift: f64,
    tol: f64,
    max_iters: usize,
) -> Vec<f64> {
    let nr = g.len();
    let mut d = vec![0.0; nr];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iters {
        if rr.sqrt() <= tol {
            break;
        }
        let mut ap = apply(&p);
        if shift > 0.0 {
            axpy(shift, &p, &mut ap);
        }
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut d);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    if d.iter().all(|v| *v == 0.0) {
        return g.iter().map(|v| -v).collect();
    }
    d
}

/// Armijo backtracking from `α = 1`; `None` when `α` underflows.
fn line_search(
    sub: &DualSubproblem<'_>,
    u: &[f64],
    cur: &PsiEval,
    d: &[f64],
    cfg: &SolverConfig,
) -> Option<(Vec<f64>, PsiEval)> {
    let gd = dot(&cur.grad, d);
    if !(gd < 0.0) {
        return None;
    }
    let slack = 16.0 * f64::EPSILON * (1.0 + cur.value.abs());
    let mut alpha = 1.0;
    while alpha >= 1e-16 {
        let trial: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let e = sub.evaluate(&trial);
        if e.value <= cur.value + cfg.ls_mu * alpha * gd + slack {
            return Some((trial, e));
        }
        alpha *= cfg.ls_rho;
    }
    None
}

/// Semismooth Newton method with Armijo line search on `min Ψ`.
pub fn ssn_solve(
    sub: &DualSubproblem<'_>,
    u0: &[f64],
    inner_tol: f64,
    cfg: &SolverConfig,
) -> SsnOutput {
    ssn_solve_capped(sub, u0, inner_tol, cfg, cfg.max_inner)
}

fn ssn_solve_capped(
    sub: &DualSubproblem<'_>,
    u0: &[f64],
    inner_tol: f64,
    cfg: &SolverConfig,
    max_iters: usize,
) -> SsnOutput {
    let mut u = u0.to_vec();
    let mut cur = sub.evaluate(&u);
    let mut iters = 0;
    let mut stalls = 0;
    let mut grad_history = Vec::new();
    while iters < max_iters {
        let ng = norm2(&cur.grad);
        grad_history.push(ng);
        if ng <= inner_tol {
            break;
        }
        let jac = sub.jacobian(&cur);
        let d = newton_direction(&jac, sub, &cur.grad, cfg);
        iters += 1;
        let step = line_search(sub, &u, &cur, &d, cfg).or_else(|| {
            stalls += 1;
            let sd: Vec<f64> = cur.grad.iter().map(|v| -v / ng).collect();
            line_search(sub, &u, &cur, &sd, cfg)
        });
        match step {
            Some((nu, e)) => {
                u = nu;
                cur = e;
            }
            None => break,
        }
    }
    let grad_norm = norm2(&cur.grad);
    if grad_history.last() != Some(&grad_norm) {
        grad_history.push(grad_norm);
    }
    SsnOutput {
        grad_norm,
        grad_history,
        u,
        beta: cur.beta,
        y: cur.y,
        iters,
        stalls,
    }
}

/// Outer iterate of the proximal point method.
#[derive(Debug, Clone)]
pub struct PpaState {
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma_k: f64,
    pub tau_k: f64,
    pub k: usize,
    pub inner_total: usize,
    pub last_u: Vec<f64>,
}

/// Solves `min ‖Xβ − Y‖ + λp(β)` by the proximal point dual Newton method.
pub fn ppa_solve(ds: &Dataset, reg: &Regularizer, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    reg.check_dim(ds.n_features())?;
    let start = Instant::now();
    let lambda = cfg.lambda;
    let mut st = PpaState {
        beta: vec![0.0; ds.n_features()],
        y: ds.y.iter().map(|v| -v).collect(),
        sigma_k: cfg.sigma0,
        tau_k: cfg.tau0,
        k: 0,
        inner_total: 0,
        last_u: vec![0.0; ds.n_samples()],
    };
    let info = TerminationInfo {
        overfit_tol: cfg.overfit_tol,
        ..Default::default()
    };
    let mut progress = evaluate(ds, reg, lambda, &st.beta, info).report.value;
    let (status, eval) = loop {
        let inner_tol = (cfg.inner_tol_c0 * (0.5 * progress).min(0.5f64.powi(st.k as i32)))
            .max(0.1 * cfg.tol);
        let sub = DualSubproblem {
            ds,
            reg,
            lambda,
            sigma: st.sigma_k,
            tau: st.tau_k,
            beta_k: &st.beta,
            y_k: &st.y,
        };
        let u0 = if cfg.warm_start {
            st.last_u.clone()
        } else {
            vec![0.0; ds.n_samples()]
        };
        let budget = cfg.max_inner.min(cfg.max_inner_total.saturating_sub(st.inner_total)).max(1);
        let out = ssn_solve_capped(&sub, &u0, inner_tol, cfg, budget);
        st.inner_total += out.iters;
        st.k += 1;
        let prev = std::mem::replace(&mut st.beta, out.beta);
        st.y = out.y;
        st.last_u = out.u;
        let eval = evaluate(
            ds,
            reg,
            lambda,
            &st.beta,
            TerminationInfo {
                dual: Some(&st.last_u),
                previous: Some(&prev),
                overfit_tol: cfg.overfit_tol,
            },
        );
        progress = eval.report.value;
        if eval.report.value <= cfg.tol {
            let s = if eval.zero_residual { Status::Overfit } else { Status::Converged };
            break (s, eval);
        }
        if start.elapsed().as_secs_f64() >= cfg.max_time_seconds {
            break (Status::TimeLimit, eval);
        }
        if st.k >= cfg.max_outer || st.inner_total >= cfg.max_inner_total {
            break (Status::MaxIterations, eval);
        }
        st.sigma_k = (cfg.decay * st.sigma_k).max(cfg.sigma_floor);
        st.tau_k = (cfg.decay * st.tau_k).max(cfg.tau_floor);
    };
    Ok(SolveResult {
        beta: st.beta,
        residual_y: eval.residual,
        dual_u: st.last_u,
        status,
        criterion: eval.report,
        outer_iters: st.k,
        inner_iters: st.inner_total,
        objective_primal: eval.primal,
        objective_dual: eval.dual,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CriterionKind, GroupStructure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(nr: usize, nc: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(nr, nc, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..nr).map(|_| rng.random_range(-2.0..2.0)).collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn psi_at_origin() {
        let ds = instance(5, 4, 1);
        let reg = Regularizer::fused(0.5, 0.5).unwrap();
        let beta = vec![0.0; 4];
        let y: Vec<f64> = ds.y.iter().map(|v| -v).collect();
        let sub = DualSubproblem { ds: &ds, reg: &reg, lambda: 0.3, sigma: 0.7, tau: 0.4, beta_k: &beta, y_k: &y };
        let expect = -0.4 * moreau_envelope(NormTerm::L2(1.0 / 0.4), &y);
        let u = vec![0.0; 5];
        assert!((psi_value(&sub, &u) - expect).abs() < 1e-12);
        assert!((sub.psi_value_envelope(&u) - expect).abs() < 1e-12);
    }

    #[test]
    fn envelope_and_lagrangian_forms_agree() {
        let ds = instance(6, 9, 2);
        let g = GroupStructure::contiguous(9, 3).unwrap();
        let reg = Regularizer::sparse_group(g, 0.4, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let beta: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sub = DualSubproblem { ds: &ds, reg: &reg, lambda: 0.5, sigma: 0.8, tau: 0.6, beta_k: &beta, y_k: &y };
        for _ in 0..20 {
            let u: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = psi_value(&sub, &u);
            let b = sub.psi_value_envelope(&u);
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_is_y_when_both_proxes_vanish() {
        let ds = instance(4, 3, 4);
        let reg = Regularizer::fused(1.0, 0.0).unwrap();
        let beta = vec![0.0; 3];
        let y = vec![0.0; 4];
        let sub = DualSubproblem { ds: &ds, reg: &reg, lambda: 100.0, sigma: 1.0, tau: 1.0, beta_k: &beta, y_k: &y };
        let (g, b, yy) = psi_gradient(&sub, &[0.01, 0.0, -0.02, 0.0]);
        assert_eq!(g, ds.y);
        assert!(b.iter().chain(&yy).all(|v| *v == 0.0));
    }

    #[test]
    fn optimal_start_takes_no_iterations() {
        let ds = instance(8, 5, 5);
        let reg = Regularizer::fused(0.5, 0.5).unwrap();
        let beta = vec![0.0; 5];
        let y: Vec<f64> = ds.y.iter().map(|v| -v).collect();
        let cfg = SolverConfig::new(0.2);
        let sub = DualSubproblem { ds: &ds, reg: &reg, lambda: 0.2, sigma: 1.0, tau: 1.0, beta_k: &beta, y_k: &y };
        let first = ssn_solve(&sub, &[0.0; 8], 1e-10, &cfg);
        assert!(first.grad_norm <= 1e-10);
        let again = ssn_solve(&sub, &first.u, 1e-10, &cfg);
        assert_eq!(again.iters, 0);
    }

    #[test]
    fn large_lambda_gives_zero_in_one_step() {
        let ds = instance(10, 20, 6);
        let g = GroupStructure::contiguous(20, 4).unwrap();
        let reg = Regularizer::sparse_group(g, 0.5, 0.5).unwrap();
        let xty: Vec<f64> = ds.x.tr_mul(&ds.y).iter().map(|v| v / norm2(&ds.y)).collect();
        let thr = crate::dro::dual_seminorm(&xty, &reg).unwrap();
        let res = ppa_solve(&ds, &reg, &SolverConfig::new(1.01 * thr)).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert_eq!(res.outer_iters, 1);
        assert!(res.inner_iters <= 5);
        assert!(res.beta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solves_small_problem_to_tolerance() {
        let ds = instance(40, 30, 7);
        for reg in [
            Regularizer::sparse_group(GroupStructure::contiguous(30, 5).unwrap(), 0.5, 0.5).unwrap(),
            Regularizer::fused(0.3, 0.7).unwrap(),
        ] {
            let res = ppa_solve(&ds, &reg, &SolverConfig::new(0.3)).unwrap();
            assert_eq!(res.status, Status::Converged, "{:?}", res.criterion);
            assert_eq!(res.criterion.kind, CriterionKind::Kkt);
            let r = crate::vecops::sub(&ds.x.mul(&res.beta), &ds.y);
            assert!(dist2(&r, &res.residual_y) <= 1e-10 * (1.0 + norm2(&r)));
            let gap = (res.objective_primal - res.objective_dual) / (1.0 + res.objective_primal.abs());
            assert!((-1e-12..=1e-6).contains(&gap), "gap {gap}");
        }
    }
}
