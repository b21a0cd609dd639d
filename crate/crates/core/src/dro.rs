//! Dual seminorms and the distributionally robust reading of the square-root
//! model: the worst-case expected squared loss over a transport ball of radius
//! `δ` equals `(1/N)(‖Y − Xβ‖ + √(δN)·p(β))²`.

use crate::error::{check_len, Error, Result};
use crate::model::{Dataset, Penalty, Regularizer};
use crate::prox::prox_l1;
use crate::vecops::{norm2, norm_inf, sub};

fn check_unit_weights(reg: &Regularizer) -> Result<()> {
    if ((reg.w1 + reg.w2) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "weights must sum to one, got w1 + w2 = {}",
            reg.w1 + reg.w2
        )));
    }
    Ok(())
}

/// `p_*(α) = sup{⟨α, β⟩ : p(β) ≤ 1}`, possibly `+∞`. Requires `w1 + w2 = 1`.
pub fn dual_seminorm(alpha: &[f64], reg: &Regularizer) -> Result<f64> {
    check_unit_weights(reg)?;
    reg.check_dim(alpha.len())?;
    Ok(dual_norm_general(alpha, reg))
}

/// Dual seminorm for arbitrary nonnegative weights.
pub(crate) fn dual_norm_general(alpha: &[f64], reg: &Regularizer) -> f64 {
    let s = reg.w1 + reg.w2;
    let (w1, w2) = (reg.w1 / s, reg.w2 / s);
    let v = match &reg.kind {
        Penalty::SparseGroup(groups) => groups
            .iter()
            .map(|(idx, w)| {
                let a: Vec<f64> = idx.iter().map(|&i| alpha[i]).collect();
                sparse_group_block_dual(&a, w1, w2, w)
            })
            .fold(0.0, f64::max),
        Penalty::Fused => fused_dual(alpha, w1, w2),
    };
    v / s
}

/// Smallest `t ≥ 0` with `‖soft(a, t·w1)‖ ≤ t·w2·ω`.
fn sparse_group_block_dual(a: &[f64], w1: f64, w2: f64, omega: f64) -> f64 {
    let na = norm2(a);
    let ninf = norm_inf(a);
    if na == 0.0 {
        return 0.0;
    }
    if w2 == 0.0 {
        return ninf / w1;
    }
    if w1 == 0.0 {
        return na / (w2 * omega);
    }
    let feasible = |t: f64| norm2(&prox_l1(a, t * w1)) <= t * w2 * omega;
    let mut lo = 0.0;
    let mut hi = (na / (w2 * omega)).min(ninf / w1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn fused_dual(alpha: &[f64], w1: f64, w2: f64) -> f64 {
    let n = alpha.len();
    if n == 0 {
        return 0.0;
    }
    if w2 == 0.0 {
        return norm_inf(alpha) / w1;
    }
    if w1 == 0.0 {
        let total: f64 = alpha.iter().sum();
        let scale: f64 = alpha.iter().map(|a| a.abs()).sum();
        if total.abs() > 1e-12 * (1.0 + scale) {
            return f64::INFINITY;
        }
        let mut c = 0.0;
        let mut m = 0.0f64;
        for &a in &alpha[..n - 1] {
            c += a;
            m = m.max(c.abs());
        }
        return m / w2;
    }
    // α ∈ t·(w1·[−1,1]ⁿ + w2·Bᵀ[−1,1]ⁿ⁻¹) decided by forward interval propagation
    // of ζ_i = w2·z_i, then bisection on t.
    let feasible = |t: f64| {
        let (r1, r2) = (t * w1, t * w2);
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for &a in &alpha[..n - 1] {
            lo = (lo + a - r1).max(-r2);
            hi = (hi + a + r1).min(r2);
            if lo > hi {
                return false;
            }
        }
        let a = alpha[n - 1];
        lo + a - r1 <= 0.0 && 0.0 <= hi + a + r1
    };
    let mut lo = 0.0;
    let mut hi = norm_inf(alpha) / w1;
    if hi == 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `φ_γ(Z, p)` with the conventions `0/0 = 0` and `1/0 = ∞`.
pub fn phi_gamma(z: f64, p: f64, gamma: f64) -> f64 {
    let p2 = p * p;
    if p == 0.0 {
        z * z
    } else if p2 < gamma {
        z * z + z * z * p2 / (gamma - p2)
    } else if p2 == gamma && z == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Closed-form worst-case loss and the optimal multiplier `γ*`.
pub fn worst_case_loss(ds: &Dataset, reg: &Regularizer, beta: &[f64], delta: f64) -> Result<(f64, f64)> {
    check_unit_weights(reg)?;
    check_len("beta", ds.n_features(), beta.len())?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta}")));
    }
    let nn = ds.n_samples() as f64;
    let r = norm2(&sub(&ds.y, &ds.x.mul(beta)));
    let p = reg.value(beta);
    let value = (r + (delta * nn).sqrt() * p).powi(2) / nn;
    let gamma = if r == 0.0 || p == 0.0 {
        p * p
    } else if delta == 0.0 {
        f64::INFINITY
    } else {
        r * p / (nn * delta).sqrt() + p * p
    };
    Ok((value, gamma))
}

/// Numerical `inf_{γ} γδ + (1/N)Σφ_γ(Y_i − X_iᵀβ)` over `γ ∈ (p², p² + 10⁶]`,
/// by golden-section search on `log(γ − p²)`.
pub fn worst_case_loss_numeric(ds: &Dataset, reg: &Regularizer, beta: &[f64], delta: f64) -> f64 {
    let nn = ds.n_samples() as f64;
    let z = sub(&ds.y, &ds.x.mul(beta));
    let p = reg.value(beta);
    let p2 = p * p;
    let f = |t: f64| {
        let gamma = p2 + t.exp();
        gamma * delta + z.iter().map(|&zi| phi_gamma(zi, p, gamma)).sum::<f64>() / nn
    };
    if p == 0.0 {
        // objective is γδ + const, minimized at γ → 0⁺
        return f(-700.0);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-700.0f64, 1e6f64.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a < 1e-12 {
            break;
        }
    }
    fc.min(fd).min(f(0.5 * (a + b)))
}

/// Outcome of [`dro_equivalence_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroReport {
    pub samples: usize,
    /// Max of `|√(N·W(β, λ²/N)) − (‖Y − Xβ‖ + λp(β))| / (1 + objective)`.
    pub max_identity_deviation: f64,
    /// Max relative gap between the closed form and the golden-section value.
    pub max_oracle_deviation: f64,
    pub passed: bool,
}

/// Checks the radius-`λ²/N` equivalence on every sample `β`.
pub fn dro_equivalence_check(
    ds: &Dataset,
    reg: &Regularizer,
    lambda: f64,
    betas: &[Vec<f64>],
) -> Result<DroReport> {
    let nn = ds.n_samples() as f64;
    let delta = lambda * lambda / nn;
    let mut id_dev = 0.0f64;
    let mut or_dev = 0.0f64;
    for beta in betas {
        let (value, _) = worst_case_loss(ds, reg, beta, delta)?;
        let obj = norm2(&sub(&ds.y, &ds.x.mul(beta))) + lambda * reg.value(beta);
        id_dev = id_dev.max(((nn * value).sqrt() - obj).abs() / (1.0 + obj));
        let numeric = worst_case_loss_numeric(ds, reg, beta, delta);
        or_dev = or_dev.max((numeric - value).abs() / value.abs().max(f64::MIN_POSITIVE));
    }
    Ok(DroReport {
        samples: betas.len(),
        max_identity_deviation: id_dev,
        max_oracle_deviation: or_dev,
        passed: id_dev <= 1e-9 && or_dev <= 1e-8,
    })
}
