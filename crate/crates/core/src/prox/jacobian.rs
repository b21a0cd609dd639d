//! Explicit elements of the generalized Jacobians of the proximal maps, and
//! the Newton operator `H = σ⁻¹ X M Xᵀ + τ⁻¹ V_loss` they assemble into.

use std::cell::Cell;

use nalgebra::DMatrix;

use super::{soft, tv_denoise};
use crate::design::Design;
use crate::model::{Penalty, Regularizer};
use crate::vecops::{dot, norm2, norm_inf};

/// Element of `∂prox_{κ‖·‖}(ỹ)`: `a I + b ỹỹᵀ` or zero.
#[derive(Debug, Clone, PartialEq)]
pub enum LossJacobian {
    Zero,
    Active { a: f64, b: f64, z: Vec<f64> },
}

impl LossJacobian {
    /// `κ` is the threshold; the boundary `‖z‖ = κ` takes the zero branch.
    pub fn new(z: &[f64], kappa: f64) -> Self {
        let nz = norm2(z);
        if nz <= kappa {
            LossJacobian::Zero
        } else {
            LossJacobian::Active {
                a: 1.0 - kappa / nz,
                b: kappa / (nz * nz * nz),
                z: z.to_vec(),
            }
        }
    }

    pub fn apply_into(&self, w: &[f64], scale: f64, out: &mut [f64]) {
        if let LossJacobian::Active { a, b, z } = self {
            let c = b * dot(z, w);
            for ((o, wi), zi) in out.iter_mut().zip(w).zip(z) {
                *o += scale * (a * wi + c * zi);
            }
        }
    }

    pub fn dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            LossJacobian::Zero => DMatrix::zeros(dim, dim),
            LossJacobian::Active { a, b, z } => {
                let zv = nalgebra::DVector::from_column_slice(z);
                DMatrix::identity(dim, dim) * *a + &zv * zv.transpose() * *b
            }
        }
    }
}

/// One group's contribution `V_l U_l` restricted to its active coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBlock {
    /// Feature indices kept by the ℓ₁ mask.
    pub active: Vec<usize>,
    pub a: f64,
    pub b: f64,
    /// Soft-thresholded values on `active`.
    pub z: Vec<f64>,
}

/// Element of `∂prox_{κp}(x̃)` on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyJacobian {
    SparseGroup(Vec<GroupBlock>),
    /// Maximal fused runs `(start, len)` that survive the ℓ₁ mask; the element
    /// averages within each run and vanishes elsewhere.
    Fused(Vec<(usize, usize)>),
}

impl PenaltyJacobian {
    pub fn is_zero(&self) -> bool {
        match self {
            PenaltyJacobian::SparseGroup(b) => b.is_empty(),
            PenaltyJacobian::Fused(r) => r.is_empty(),
        }
    }

    /// Number of features touched by the element.
    pub fn support_size(&self) -> usize {
        match self {
            PenaltyJacobian::SparseGroup(b) => b.iter().map(|g| g.active.len()).sum(),
            PenaltyJacobian::Fused(r) => r.iter().map(|&(_, l)| l).sum(),
        }
    }

    /// `M v` for `v ∈ ℝⁿ`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        match self {
            PenaltyJacobian::SparseGroup(blocks) => {
                for g in blocks {
                    let c = g.b * g.active.iter().zip(&g.z).map(|(&i, z)| z * v[i]).sum::<f64>();
                    for (&i, z) in g.active.iter().zip(&g.z) {
                        out[i] = g.a * v[i] + c * z;
                    }
                }
            }
            PenaltyJacobian::Fused(runs) => {
                for &(s, l) in runs {
                    let m = v[s..s + l].iter().sum::<f64>() / l as f64;
                    out[s..s + l].fill(m);
                }
            }
        }
        out
    }

    pub fn dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        match self {
            PenaltyJacobian::SparseGroup(blocks) => {
                for g in blocks {
                    for (p, &i) in g.active.iter().enumerate() {
                        m[(i, i)] += g.a;
                        for (q, &j) in g.active.iter().enumerate() {
                            m[(i, j)] += g.b * g.z[p] * g.z[q];
                        }
                    }
                }
            }
            PenaltyJacobian::Fused(runs) => {
                for &(s, l) in runs {
                    for i in s..s + l {
                        for j in s..s + l {
                            m[(i, j)] = 1.0 / l as f64;
                        }
                    }
                }
            }
        }
        m
    }
}

/// Element of `∂prox_{κp}(x̃)`.
pub fn jac_penalty(x_tilde: &[f64], reg: &Regularizer, kappa: f64) -> PenaltyJacobian {
    let k1 = kappa * reg.w1;
    let keep = |v: f64| if reg.w1 > 0.0 { v.abs() > k1 } else { true };
    match &reg.kind {
        Penalty::SparseGroup(groups) => {
            let mut blocks = Vec::new();
            for (idx, w) in groups.iter() {
                let k2 = kappa * reg.w2 * w;
                let mut active = Vec::new();
                let mut z = Vec::new();
                for &i in idx {
                    if keep(x_tilde[i]) {
                        active.push(i);
                        z.push(soft(x_tilde[i], k1));
                    }
                }
                if active.is_empty() {
                    continue;
                }
                let nz = norm2(&z);
                if reg.w2 == 0.0 {
                    blocks.push(GroupBlock { active, a: 1.0, b: 0.0, z });
                } else if nz > k2 {
                    blocks.push(GroupBlock {
                        active,
                        a: 1.0 - k2 / nz,
                        b: k2 / (nz * nz * nz),
                        z,
                    });
                }
            }
            PenaltyJacobian::SparseGroup(blocks)
        }
        Penalty::Fused => {
            let z = if reg.w2 > 0.0 {
                tv_denoise(x_tilde, kappa * reg.w2)
            } else {
                x_tilde.to_vec()
            };
            let tol = 1e-12 * (1.0 + norm_inf(&z));
            let n = z.len();
            let mut runs = Vec::new();
            let mut s = 0;
            while s < n {
                let mut e = s + 1;
                if reg.w2 > 0.0 {
                    while e < n && (z[e] - z[e - 1]).abs() <= tol {
                        e += 1;
                    }
                }
                let mean = z[s..e].iter().sum::<f64>() / (e - s) as f64;
                if keep(mean) {
                    runs.push((s, e - s));
                }
                s = e;
            }
            PenaltyJacobian::Fused(runs)
        }
    }
}

/// Loss-side element with threshold `1/τ`.
pub fn jac_loss(y_tilde: &[f64], tau: f64) -> LossJacobian {
    LossJacobian::new(y_tilde, 1.0 / tau)
}

/// Generalized Jacobian element of the SSN gradient at `(β̃, ỹ)`.
#[derive(Debug, Clone)]
pub struct JacobianElement {
    pub penalty: PenaltyJacobian,
    pub loss: LossJacobian,
    pub sigma: f64,
    pub tau: f64,
    /// Per-run column sums `X_R 1` for fused elements.
    run_sums: Vec<Vec<f64>>,
    flops: Cell<u64>,
}

pub fn jac_sparse_group(
    x: &Design,
    x_tilde: &[f64],
    y_tilde: &[f64],
    reg: &Regularizer,
    lambda: f64,
    sigma: f64,
    tau: f64,
) -> JacobianElement {
    debug_assert!(matches!(reg.kind, Penalty::SparseGroup(_)));
    JacobianElement::new(x, x_tilde, y_tilde, reg, lambda, sigma, tau)
}

pub fn jac_fused(
    x: &Design,
    x_tilde: &[f64],
    y_tilde: &[f64],
    reg: &Regularizer,
    lambda: f64,
    sigma: f64,
    tau: f64,
) -> JacobianElement {
    debug_assert!(matches!(reg.kind, Penalty::Fused));
    JacobianElement::new(x, x_tilde, y_tilde, reg, lambda, sigma, tau)
}

impl JacobianElement {
    pub fn new(
        x: &Design,
        x_tilde: &[f64],
        y_tilde: &[f64],
        reg: &Regularizer,
        lambda: f64,
        sigma: f64,
        tau: f64,
    ) -> Self {
        let penalty = jac_penalty(x_tilde, reg, lambda / sigma);
        let loss = jac_loss(y_tilde, tau);
        let run_sums = match &penalty {
            PenaltyJacobian::Fused(runs) => runs
                .iter()
                .map(|&(s, l)| {
                    let mut c = vec![0.0; x.nrows()];
                    for j in s..s + l {
                        x.col_axpy(j, 1.0, &mut c);
                    }
                    c
                })
                .collect(),
            PenaltyJacobian::SparseGroup(_) => Vec::new(),
        };
        JacobianElement {
            penalty,
            loss,
            sigma,
            tau,
            run_sums,
            flops: Cell::new(0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.penalty.is_zero() && self.loss == LossJacobian::Zero
    }

    /// Multiply-adds spent in [`apply`](Self::apply) so far.
    pub fn flops(&self) -> u64 {
        self.flops.get()
    }

    /// `H w` without forming `H`.
    pub fn apply(&self, x: &Design, w: &[f64]) -> Vec<f64> {
        let nr = w.len();
        let mut out = vec![0.0; nr];
        let inv_s = 1.0 / self.sigma;
        let mut ops = 0u64;
        match &self.penalty {
            PenaltyJacobian::SparseGroup(blocks) => {
                let mut t = Vec::new();
                for g in blocks {
                    t.clear();
                    t.extend(g.active.iter().map(|&j| x.col_dot(j, w)));
                    let c = g.b * dot(&g.z, &t);
                    for ((&j, tj), zj) in g.active.iter().zip(&t).zip(&g.z) {
                        x.col_axpy(j, inv_s * (g.a * tj + c * zj), &mut out);
                        ops += 2 * x.col_len(j) as u64;
                    }
                }
            }
            PenaltyJacobian::Fused(runs) => {
                for (&(_, l), s) in runs.iter().zip(&self.run_sums) {
                    let c = inv_s * dot(s, w) / l as f64;
                    crate::vecops::axpy(c, s, &mut out);
                    ops += 2 * nr as u64;
                }
            }
        }
        if let LossJacobian::Active { .. } = self.loss {
            ops += 2 * nr as u64;
        }
        self.loss.apply_into(w, 1.0 / self.tau, &mut out);
        self.flops.set(self.flops.get() + ops);
        out
    }

    /// Dense `N × N` matrix of the operator.
    pub fn dense(&self, x: &Design) -> DMatrix<f64> {
        let nr = x.nrows();
        let mut h = self.loss.dense(nr) / self.tau;
        let inv_s = 1.0 / self.sigma;
        match &self.penalty {
            PenaltyJacobian::SparseGroup(blocks) => {
                for g in blocks {
                    let xa = x.select_columns(&g.active);
                    let xz = &xa * nalgebra::DVector::from_column_slice(&g.z);
                    h += (&xa * xa.transpose()) * (inv_s * g.a);
                    h += (&xz * xz.transpose()) * (inv_s * g.b);
                }
            }
            PenaltyJacobian::Fused(runs) => {
                for (&(_, l), s) in runs.iter().zip(&self.run_sums) {
                    let sv = nalgebra::DVector::from_column_slice(s);
                    h += (&sv * sv.transpose()) * (inv_s / l as f64);
                }
            }
        }
        h
    }

    /// Trace of `H`, used to scale the damping.
    pub fn trace(&self, x: &Design) -> f64 {
        let mut t = match &self.loss {
            LossJacobian::Zero => 0.0,
            LossJacobian::Active { a, b, z } => (a * z.len() as f64 + b * dot(z, z)) / self.tau,
        };
        match &self.penalty {
            PenaltyJacobian::SparseGroup(blocks) => {
                for g in blocks {
                    let mut xz = vec![0.0; x.nrows()];
                    for (&j, zj) in g.active.iter().zip(&g.z) {
                        t += g.a * x.col_sq_norm(j) / self.sigma;
                        x.col_axpy(j, *zj, &mut xz);
                    }
                    t += g.b * dot(&xz, &xz) / self.sigma;
                }
            }
            PenaltyJacobian::Fused(runs) => {
                for (&(_, l), s) in runs.iter().zip(&self.run_sums) {
                    t += dot(s, s) / (l as f64 * self.sigma);
                }
            }
        }
        t
    }
}
