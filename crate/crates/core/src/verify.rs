//! Independent numerical cross-checks used by the test suites and the
//! `verify` command.
//!
//! Every oracle here takes a different route from the production kernels:
//! proximal maps are recomputed by coordinate descent on their duals, Jacobian
//! elements are assembled densely from the projector formulas with an
//! eigendecomposition pseudo-inverse, and derivatives are compared against
//! central differences.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::rng_from_seed;
use crate::design::Design;
use crate::dro::dro_equivalence_check;
use crate::model::{Dataset, GroupStructure, Penalty, Regularizer};
use crate::ppdna::DualSubproblem;
use crate::prox::{
    jac_loss, jac_penalty, moreau_envelope, moreau_gradient, prox_l1, tv_denoise, JacobianElement,
    NormTerm,
};
use crate::vecops::{norm2, norm_inf};

/// `prox_{κp}(x)` by cyclic exact minimization over the blocks of the dual
/// `min ½‖x − κ(w1·a + w2·Kb)‖²` with box/ball constraints on `(a, b)`.
pub fn prox_oracle(x: &[f64], reg: &Regularizer, kappa: f64) -> Vec<f64> {
    let n = x.len();
    let (c1, c2) = (kappa * reg.w1, kappa * reg.w2);
    let mut a = vec![0.0; n];
    let mut r = x.to_vec();
    match &reg.kind {
        Penalty::SparseGroup(groups) => {
            let mut b: Vec<Vec<f64>> = groups.groups().iter().map(|g| vec![0.0; g.len()]).collect();
            for _ in 0..1_000_000 {
                let mut change = 0.0f64;
                if c1 > 0.0 {
                    for i in 0..n {
                        let new = ((r[i] + c1 * a[i]) / c1).clamp(-1.0, 1.0);
                        r[i] -= c1 * (new - a[i]);
                        change = change.max((c1 * (new - a[i])).abs());
                        a[i] = new;
                    }
                }
                if c2 > 0.0 {
                    for ((idx, w), bl) in groups.iter().zip(b.iter_mut()) {
                        let s = c2 * w;
                        let mut t: Vec<f64> = idx.iter().zip(bl.iter()).map(|(&i, bi)| (r[i] + s * bi) / s).collect();
                        let nt = norm2(&t);
                        if nt > 1.0 {
                            t.iter_mut().for_each(|v| *v /= nt);
                        }
                        for ((&i, bi), ti) in idx.iter().zip(bl.iter_mut()).zip(&t) {
                            r[i] -= s * (ti - *bi);
                            change = change.max((s * (ti - *bi)).abs());
                            *bi = *ti;
                        }
                    }
                }
                if change < 1e-15 {
                    break;
                }
            }
        }
        Penalty::Fused => {
            // (Bᵀz)_i = z_i − z_{i−1}
            let mut z = vec![0.0; n.saturating_sub(1)];
            for _ in 0..1_000_000 {
                let mut change = 0.0f64;
                if c1 > 0.0 {
                    for i in 0..n {
                        let new = ((r[i] + c1 * a[i]) / c1).clamp(-1.0, 1.0);
                        r[i] -= c1 * (new - a[i]);
                        change = change.max((c1 * (new - a[i])).abs());
                        a[i] = new;
                    }
                }
                if c2 > 0.0 {
                    for i in 0..z.len() {
                        let p = r[i] + c2 * z[i];
                        let q = r[i + 1] - c2 * z[i];
                        let new = ((p - q) / (2.0 * c2)).clamp(-1.0, 1.0);
                        let d = c2 * (new - z[i]);
                        r[i] -= d;
                        r[i + 1] += d;
                        change = change.max(d.abs());
                        z[i] = new;
                    }
                }
                if change < 1e-15 {
                    break;
                }
            }
        }
    }
    r
}

fn first_difference(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n.saturating_sub(1), n);
    for i in 0..n.saturating_sub(1) {
        b[(i, i)] = 1.0;
        b[(i, i + 1)] = -1.0;
    }
    b
}

fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let top = e.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut inv = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &l) in e.eigenvalues.iter().enumerate() {
        if l.abs() > 1e-10 * top.max(1e-300) {
            let v = e.eigenvectors.column(k);
            inv += (v * v.transpose()) / l;
        }
    }
    inv
}

/// Dense `U W` or `V U` element of `∂prox_{κp}(x̃)` from the matrix formulas.
pub fn penalty_jacobian_dense(x_tilde: &[f64], reg: &Regularizer, kappa: f64) -> DMatrix<f64> {
    let n = x_tilde.len();
    let k1 = kappa * reg.w1;
    let mask = |v: f64| if reg.w1 == 0.0 || v.abs() > k1 { 1.0 } else { 0.0 };
    match &reg.kind {
        Penalty::SparseGroup(groups) => {
            let mut m = DMatrix::zeros(n, n);
            for (idx, w) in groups.iter() {
                let k2 = kappa * reg.w2 * w;
                let xg: Vec<f64> = idx.iter().map(|&i| x_tilde[i]).collect();
                let z = DVector::from_vec(prox_l1(&xg, k1));
                let nz = z.norm();
                let sz = idx.len();
                let v = if reg.w2 == 0.0 {
                    DMatrix::identity(sz, sz)
                } else if nz > k2 {
                    DMatrix::identity(sz, sz) * (1.0 - k2 / nz) + (&z * z.transpose()) * (k2 / nz.powi(3))
                } else {
                    DMatrix::zeros(sz, sz)
                };
                let u = DMatrix::from_diagonal(&DVector::from_iterator(sz, xg.iter().map(|&v| mask(v))));
                let vu = v * u;
                for (p, &i) in idx.iter().enumerate() {
                    for (q, &j) in idx.iter().enumerate() {
                        m[(i, j)] = vu[(p, q)];
                    }
                }
            }
            m
        }
        Penalty::Fused => {
            let z = if reg.w2 > 0.0 { tv_denoise(x_tilde, kappa * reg.w2) } else { x_tilde.to_vec() };
            let b = first_difference(n);
            let tol = 1e-12 * (1.0 + norm_inf(&z));
            let sigma = DMatrix::from_diagonal(&DVector::from_iterator(
                n.saturating_sub(1),
                (0..n.saturating_sub(1)).map(|i| if reg.w2 > 0.0 && (z[i] - z[i + 1]).abs() <= tol { 1.0 } else { 0.0 }),
            ));
            let sbbs = &sigma * &b * b.transpose() * &sigma;
            let w = DMatrix::identity(n, n) - b.transpose() * pinv_sym(&sbbs) * &b;
            let u = DMatrix::from_diagonal(&DVector::from_iterator(n, z.iter().map(|&v| mask(v))));
            u * w
        }
    }
}

/// Dense `σ⁻¹ X M Xᵀ + τ⁻¹ V_{1/τ}(ỹ)`.
pub fn newton_matrix_dense(
    x: &Design,
    x_tilde: &[f64],
    y_tilde: &[f64],
    reg: &Regularizer,
    lambda: f64,
    sigma: f64,
    tau: f64,
) -> DMatrix<f64> {
    let xd = x.to_dense();
    let m = penalty_jacobian_dense(x_tilde, reg, lambda / sigma);
    let nr = y_tilde.len();
    let yv = DVector::from_column_slice(y_tilde);
    let ny = yv.norm();
    let kappa = 1.0 / tau;
    let v = if ny > kappa {
        DMatrix::identity(nr, nr) * (1.0 - kappa / ny) + (&yv * yv.transpose()) * (kappa / ny.powi(3))
    } else {
        DMatrix::zeros(nr, nr)
    };
    &xd * m * xd.transpose() / sigma + v / tau
}

/// Central-difference Jacobian of `x ↦ prox_{κp}(x)`.
pub fn prox_jacobian_fd(x: &[f64], reg: &Regularizer, kappa: f64, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for c in 0..n {
        xp[c] = x[c] + h;
        let a = reg.prox(&xp, kappa);
        xp[c] = x[c] - h;
        let b = reg.prox(&xp, kappa);
        xp[c] = x[c];
        for r in 0..n {
            j[(r, c)] = (a[r] - b[r]) / (2.0 * h);
        }
    }
    j
}

/// Random partition of `0..n` into contiguous groups of size 1..=4.
pub fn random_groups(rng: &mut ChaCha8Rng, n: usize) -> GroupStructure {
    let mut groups = Vec::new();
    let mut s = 0;
    while s < n {
        let e = (s + rng.random_range(1..=4)).min(n);
        groups.push((s..e).collect());
        s = e;
    }
    GroupStructure::with_size_weights(groups).expect("valid partition")
}

/// Random penalty with `w1 + w2 = 1`; the pure cases occur with positive
/// probability.
pub fn random_regularizer(rng: &mut ChaCha8Rng, fused: bool, n: usize) -> Regularizer {
    let w1 = match rng.random_range(0..6) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.05..0.95),
    };
    let kind = if fused { Penalty::Fused } else { Penalty::SparseGroup(random_groups(rng, n)) };
    Regularizer::new(kind, w1, 1.0 - w1).expect("valid weights")
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, nr: usize, nc: usize) -> Dataset {
    let x = DMatrix::from_fn(nr, nc, |_, _| rng.random_range(-1.0..1.0));
    Dataset::new(x, random_vec(rng, nr, 2.0)).expect("consistent sizes")
}

/// Outcome of one family of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub name: &'static str,
    pub checks: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl FamilyReport {
    fn new(name: &'static str, checks: usize, max_deviation: f64, tolerance: f64) -> Self {
        FamilyReport {
            name,
            checks,
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }
}

impl std::fmt::Display for FamilyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<32} checks={:<6} max_dev={:.3e} tol={:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.max_deviation,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Dro,
    Prox,
    Jacobian,
    Gradient,
}

impl std::str::FromStr for Family {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "dro" => Ok(Family::Dro),
            "prox" => Ok(Family::Prox),
            "jacobian" => Ok(Family::Jacobian),
            "gradient" => Ok(Family::Gradient),
            _ => Err(crate::Error::InvalidParameter(format!("unknown family {s:?}"))),
        }
    }
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Dro, Family::Prox, Family::Jacobian, Family::Gradient];

    pub fn run(self, trials: usize, seed: u64) -> Vec<FamilyReport> {
        match self {
            Family::Dro => check_dro(trials, seed),
            Family::Prox => check_prox(trials, seed),
            Family::Jacobian => check_jacobian(trials, seed),
            Family::Gradient => check_gradient(trials, seed),
        }
    }
}

/// `trials` random `β` per penalty, spread over ten random instances.
pub fn check_dro(trials: usize, seed: u64) -> Vec<FamilyReport> {
    let mut out = Vec::new();
    for (fused, name) in [(false, "dro identity (sparse group)"), (true, "dro identity (fused)")] {
        let mut rng = rng_from_seed(seed ^ fused as u64);
        let mut worst = 0.0f64;
        let mut oracle = 0.0f64;
        for _ in 0..10 {
            let ds = random_dataset(&mut rng, 10, 15);
            let reg = random_regularizer(&mut rng, fused, 15);
            let lambda = rng.random_range(0.1..3.0);
            let per = trials.div_ceil(10).max(1);
            let betas: Vec<Vec<f64>> = (0..per)
                .map(|k| if k == 0 { vec![0.0; 15] } else { random_vec(&mut rng, 15, 2.0) })
                .collect();
            let rep = dro_equivalence_check(&ds, &reg, lambda, &betas).expect("unit weights");
            worst = worst.max(rep.max_identity_deviation);
            oracle = oracle.max(rep.max_oracle_deviation);
        }
        let checks = 10 * trials.div_ceil(10).max(1);
        out.push(FamilyReport::new(name, checks, worst, 1e-9));
        out.push(FamilyReport::new(
            if fused { "dro golden section (fused)" } else { "dro golden section (group)" },
            checks,
            oracle,
            1e-8,
        ));
    }
    out
}

/// Production proximal maps against the dual coordinate-descent oracle.
pub fn check_prox(trials: usize, seed: u64) -> Vec<FamilyReport> {
    let mut out = Vec::new();
    for (fused, name) in [(false, "prox sparse group vs oracle"), (true, "prox fused vs oracle")] {
        let mut rng = rng_from_seed(seed.wrapping_add(17 + fused as u64));
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let n = rng.random_range(1..=12);
            let reg = random_regularizer(&mut rng, fused, n);
            let x = random_vec(&mut rng, n, 3.0);
            let kappa = rng.random_range(0.05..2.0);
            let p = reg.prox(&x, kappa);
            let q = prox_oracle(&x, &reg, kappa);
            worst = worst.max(crate::vecops::dist2(&p, &q));
        }
        out.push(FamilyReport::new(name, trials, worst, 1e-6));
    }
    out
}

fn structure_stable(x: &[f64], reg: &Regularizer, kappa: f64, h: f64) -> bool {
    let base = jac_penalty(x, reg, kappa);
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        for s in [-4.0 * h, 4.0 * h] {
            xp[c] = x[c] + s;
            let j = jac_penalty(&xp, reg, kappa);
            let same = match (&base, &j) {
                (crate::prox::PenaltyJacobian::SparseGroup(a), crate::prox::PenaltyJacobian::SparseGroup(b)) => {
                    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.active == q.active)
                }
                (a, b) => a == b,
            };
            if !same {
                return false;
            }
        }
        xp[c] = x[c];
    }
    true
}

/// Structured elements against dense formulas and central differences.
pub fn check_jacobian(trials: usize, seed: u64) -> Vec<FamilyReport> {
    let mut out = Vec::new();
    for fused in [false, true] {
        let mut rng = rng_from_seed(seed.wrapping_add(31 + fused as u64));
        let mut dense_dev = 0.0f64;
        let mut fd_dev = 0.0f64;
        let mut psd_dev = 0.0f64;
        let h = 1e-6;
        let mut fd_done = 0;
        for _ in 0..trials {
            let n = rng.random_range(2..=20);
            let nr = rng.random_range(2..=12);
            let ds = random_dataset(&mut rng, nr, n);
            let reg = random_regularizer(&mut rng, fused, n);
            let (lambda, sigma, tau) = (rng.random_range(0.1..2.0), rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
            let bt = random_vec(&mut rng, n, 3.0);
            let yt = random_vec(&mut rng, nr, 3.0);
            let jac = JacobianElement::new(&ds.x, &bt, &yt, &reg, lambda, sigma, tau);
            let structured = jac.dense(&ds.x);
            let mut applied = DMatrix::zeros(nr, nr);
            for c in 0..nr {
                let mut e = vec![0.0; nr];
                e[c] = 1.0;
                applied.set_column(c, &DVector::from_vec(jac.apply(&ds.x, &e)));
            }
            let dense = newton_matrix_dense(&ds.x, &bt, &yt, &reg, lambda, sigma, tau);
            let scale = 1.0 + dense.amax();
            dense_dev = dense_dev.max((&applied - &dense).amax() / scale).max((&structured - &dense).amax() / scale);
            let e = SymmetricEigen::new((&applied + applied.transpose()) * 0.5);
            psd_dev = psd_dev.max((-e.eigenvalues.min()).max(0.0) / scale).max((&applied - applied.transpose()).amax() / scale);
            // finite differences of the prox at a differentiable point
            let kappa = lambda / sigma;
            if structure_stable(&bt, &reg, kappa, h) {
                let m = jac_penalty(&bt, &reg, kappa).dense(n);
                let fd = prox_jacobian_fd(&bt, &reg, kappa, h);
                fd_dev = fd_dev.max((m - fd).amax());
                fd_done += 1;
            }
            let lj = jac_loss(&yt, tau);
            if (norm2(&yt) - 1.0 / tau).abs() > 1e-3 {
                let ld = lj.dense(nr);
                let mut fdl = DMatrix::zeros(nr, nr);
                let mut yp = yt.clone();
                for c in 0..nr {
                    yp[c] = yt[c] + h;
                    let a = crate::prox::prox_l2(&yp, 1.0 / tau);
                    yp[c] = yt[c] - h;
                    let b = crate::prox::prox_l2(&yp, 1.0 / tau);
                    yp[c] = yt[c];
                    for r in 0..nr {
                        fdl[(r, c)] = (a[r] - b[r]) / (2.0 * h);
                    }
                }
                fd_dev = fd_dev.max((ld - fdl).amax());
            }
        }
        out.push(FamilyReport::new(
            if fused { "jacobian dense (fused)" } else { "jacobian dense (group)" },
            trials,
            dense_dev,
            1e-10,
        ));
        out.push(FamilyReport::new(
            if fused { "jacobian symmetric psd (fused)" } else { "jacobian symmetric psd (group)" },
            trials,
            psd_dev,
            1e-10,
        ));
        out.push(FamilyReport::new(
            if fused { "jacobian finite diff (fused)" } else { "jacobian finite diff (group)" },
            fd_done,
            fd_dev,
            1e-5,
        ));
    }
    out
}

/// `∇Ψ` against central differences of `Ψ`, and `∇M_f` against projections.
pub fn check_gradient(trials: usize, seed: u64) -> Vec<FamilyReport> {
    let mut rng = rng_from_seed(seed.wrapping_add(47));
    let mut worst = 0.0f64;
    let mut env = 0.0f64;
    let mut env_fd = 0.0f64;
    let h = 1e-5;
    for t in 0..trials {
        let n = rng.random_range(2..=15);
        let nr = rng.random_range(2..=10);
        let ds = random_dataset(&mut rng, nr, n);
        let reg = random_regularizer(&mut rng, t % 2 == 1, n);
        let beta = random_vec(&mut rng, n, 1.0);
        let y = random_vec(&mut rng, nr, 1.0);
        let sub = DualSubproblem {
            ds: &ds,
            reg: &reg,
            lambda: rng.random_range(0.1..2.0),
            sigma: rng.random_range(0.3..2.0),
            tau: rng.random_range(0.3..2.0),
            beta_k: &beta,
            y_k: &y,
        };
        let u = random_vec(&mut rng, nr, 2.0);
        let g = sub.evaluate(&u).grad;
        let mut up = u.clone();
        let mut dev = 0.0f64;
        for c in 0..nr {
            up[c] = u[c] + h;
            let a = sub.psi_value_envelope(&up);
            up[c] = u[c] - h;
            let b = sub.psi_value_envelope(&up);
            up[c] = u[c];
            dev = dev.max(((a - b) / (2.0 * h) - g[c]).abs());
        }
        worst = worst.max(dev / (1.0 + norm_inf(&g)));

        let x = random_vec(&mut rng, n, 3.0);
        let k = rng.random_range(0.1..2.0);
        // x − prox equals the projection onto the dual ball of radius κ
        let l1: Vec<f64> = x.iter().map(|v| v.clamp(-k, k)).collect();
        let nx = norm2(&x);
        let l2: Vec<f64> = x.iter().map(|v| if nx <= k { *v } else { v * k / nx }).collect();
        env = env
            .max(crate::vecops::dist2(&moreau_gradient(NormTerm::L1(k), &x), &l1))
            .max(crate::vecops::dist2(&moreau_gradient(NormTerm::L2(k), &x), &l2));
        let f = NormTerm::Penalty(&reg, k);
        let gm = moreau_gradient(f, &x);
        let mut xp = x.clone();
        for c in 0..n {
            xp[c] = x[c] + h;
            let a = moreau_envelope(f, &xp);
            xp[c] = x[c] - h;
            let b = moreau_envelope(f, &xp);
            xp[c] = x[c];
            env_fd = env_fd.max(((a - b) / (2.0 * h) - gm[c]).abs());
        }
    }
    vec![
        FamilyReport::new("psi gradient finite diff", trials, worst, 1e-4),
        FamilyReport::new("moreau gradient projection", trials, env, 1e-12),
        FamilyReport::new("moreau gradient finite diff", trials, env_fd, 1e-6),
    ]
}

/// Runs the requested families and returns every report.
pub fn run_all(families: &[Family], trials: usize, seed: u64) -> Vec<FamilyReport> {
    families.iter().flat_map(|f| f.run(trials, seed)).collect()
}
