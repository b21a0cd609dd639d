//! Proximal maps, Moreau envelopes and generalized Jacobian elements.

mod jacobian;
mod tv;

pub use jacobian::{
    jac_fused, jac_loss, jac_penalty, jac_sparse_group, GroupBlock, JacobianElement, LossJacobian,
    PenaltyJacobian,
};
pub use tv::tv_denoise;

use crate::error::{check_len, Error, Result};
use crate::model::{GroupStructure, Penalty, Regularizer};
use crate::vecops::{norm1, norm2};

#[inline]
fn soft(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}

/// Soft thresholding `prox_{κ‖·‖₁}`.
pub fn prox_l1(x: &[f64], kappa: f64) -> Vec<f64> {
    x.iter().map(|&v| soft(v, kappa)).collect()
}

/// Block soft thresholding `prox_{κ‖·‖}`.
pub fn prox_l2(x: &[f64], kappa: f64) -> Vec<f64> {
    let nx = norm2(x);
    if nx <= kappa {
        return vec![0.0; x.len()];
    }
    let s = 1.0 - kappa / nx;
    x.iter().map(|v| s * v).collect()
}

/// `prox_{κ‖·‖}` on ℝ^N, the proximal map of the square-root loss.
pub fn prox_sqrt_loss(x: &[f64], kappa: f64) -> Vec<f64> {
    prox_l2(x, kappa)
}

pub(crate) fn prox_sparse_group_with(
    x: &[f64],
    groups: &GroupStructure,
    w1: f64,
    w2: f64,
    kappa: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let k1 = kappa * w1;
    for (idx, w) in groups.iter() {
        let k2 = kappa * w2 * w;
        let mut sq = 0.0;
        for &i in idx {
            let v = soft(x[i], k1);
            out[i] = v;
            sq += v * v;
        }
        let nz = sq.sqrt();
        let s = if nz <= k2 { 0.0 } else { 1.0 - k2 / nz };
        for &i in idx {
            out[i] *= s;
        }
    }
    out
}

pub(crate) fn prox_fused_with(x: &[f64], w1: f64, w2: f64, kappa: f64) -> Vec<f64> {
    let z = if w2 > 0.0 {
        tv_denoise(x, kappa * w2)
    } else {
        x.to_vec()
    };
    prox_l1(&z, kappa * w1)
}

/// `prox_{κp}` for a sparse-group penalty: soft threshold, then group shrinkage.
pub fn prox_sparse_group(x: &[f64], reg: &Regularizer, kappa: f64) -> Result<Vec<f64>> {
    match &reg.kind {
        Penalty::SparseGroup(g) => {
            check_len("prox input", g.n_features(), x.len())?;
            Ok(prox_sparse_group_with(x, g, reg.w1, reg.w2, kappa))
        }
        Penalty::Fused => Err(Error::InvalidParameter(
            "prox_sparse_group needs a sparse-group penalty".into(),
        )),
    }
}

/// `prox_{κp}` for a fused penalty: TV denoising, then soft threshold.
pub fn prox_fused(x: &[f64], reg: &Regularizer, kappa: f64) -> Result<Vec<f64>> {
    match reg.kind {
        Penalty::Fused => Ok(prox_fused_with(x, reg.w1, reg.w2, kappa)),
        Penalty::SparseGroup(_) => Err(Error::InvalidParameter(
            "prox_fused needs a fused penalty".into(),
        )),
    }
}

/// A norm-type function `f` with an available proximal map.
#[derive(Debug, Clone, Copy)]
pub enum NormTerm<'a> {
    /// `κ‖·‖₁`
    L1(f64),
    /// `κ‖·‖`, also the square-root loss
    L2(f64),
    /// `κp(·)`
    Penalty(&'a Regularizer, f64),
}

impl NormTerm<'_> {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            NormTerm::L1(k) => k * norm1(x),
            NormTerm::L2(k) => k * norm2(x),
            NormTerm::Penalty(r, k) => k * r.value(x),
        }
    }

    pub fn prox(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            NormTerm::L1(k) => prox_l1(x, k),
            NormTerm::L2(k) => prox_l2(x, k),
            NormTerm::Penalty(r, k) => r.prox(x, k),
        }
    }
}

/// `M_f(x) = f(prox_f(x)) + ½‖x − prox_f(x)‖²`
pub fn moreau_envelope(f: NormTerm<'_>, x: &[f64]) -> f64 {
    let p = f.prox(x);
    let d = crate::vecops::dist2(x, &p);
    f.value(&p) + 0.5 * d * d
}

/// `∇M_f(x) = x − prox_f(x)`
pub fn moreau_gradient(f: NormTerm<'_>, x: &[f64]) -> Vec<f64> {
    crate::vecops::sub(x, &f.prox(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(&[3.0, -1.0], 2.0), vec![1.0, 0.0]);
        assert_eq!(prox_l1(&[3.0, -1.0], 0.0), vec![3.0, -1.0]);
        assert_eq!(prox_l1(&[0.5], 1.0), vec![0.0]);
    }

    #[test]
    fn l2_examples() {
        let p = prox_l2(&[3.0, 4.0], 1.0);
        assert!((p[0] - 2.4).abs() < 1e-15 && (p[1] - 3.2).abs() < 1e-15);
        assert_eq!(prox_l2(&[0.3, 0.4], 0.5), vec![0.0, 0.0]);
        assert_eq!(prox_l2(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        assert_eq!(prox_sqrt_loss(&[2.0, 0.0], 1.0), vec![1.0, 0.0]);
        assert_eq!(prox_sqrt_loss(&[0.0; 3], 1.0), vec![0.0; 3]);
    }

    #[test]
    fn degenerate_weights() {
        let g = GroupStructure::contiguous(4, 2).unwrap();
        let x = [1.0, -2.0, 0.3, 0.1];
        let only_group = Regularizer::sparse_group(g.clone(), 0.0, 1.0).unwrap();
        let p = prox_sparse_group(&x, &only_group, 0.5).unwrap();
        let a = prox_l2(&x[..2], 0.5 * 2f64.sqrt());
        assert_eq!(&p[..2], &a[..]);
        let only_l1 = Regularizer::sparse_group(g, 1.0, 0.0).unwrap();
        assert_eq!(prox_sparse_group(&x, &only_l1, 0.5).unwrap(), prox_l1(&x, 0.5));
        let f = Regularizer::fused(1.0, 0.0).unwrap();
        assert_eq!(prox_fused(&x, &f, 0.5).unwrap(), prox_l1(&x, 0.5));
        let f = Regularizer::fused(0.5, 0.5).unwrap();
        assert_eq!(prox_fused(&[2.0; 3], &f, 1.0).unwrap(), vec![1.5; 3]);
        assert!(prox_fused(&x, &only_group, 1.0).is_err());
    }

    #[test]
    fn moreau_scalar() {
        assert_eq!(moreau_envelope(NormTerm::L1(1.0), &[3.0]), 2.5);
        assert_eq!(moreau_envelope(NormTerm::L2(2.0), &[0.0, 0.0]), 0.0);
    }
}
