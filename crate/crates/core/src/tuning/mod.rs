//! Choices of `λ`: closed-form rules, Monte Carlo quantile rules, and
//! K-fold cross validation.

mod cv;
pub mod dist;

pub use cv::{
    classification_accuracy, cross_validate, cross_validate_with_folds, fold_assignment, CvCell,
    CvGrid, CvResult, PenaltyFamily,
};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::rng_from_seed;
use crate::dro::dual_norm_general;
use crate::error::{Error, Result};
use crate::model::{Dataset, GroupStructure, Regularizer};
use crate::vecops::norm_inf;

use dist::{f_quantile, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Bel,
    StS,
    BlS,
    Bun,
    StG,
    BlG,
    Jia,
}

impl std::str::FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "bel" => Rule::Bel,
            "sts" => Rule::StS,
            "bls" => Rule::BlS,
            "bun" => Rule::Bun,
            "stg" => Rule::StG,
            "blg" => Rule::BlG,
            "jia" => Rule::Jia,
            _ => return Err(Error::InvalidParameter(format!("unknown lambda rule {s:?}"))),
        })
    }
}

/// A `λ` rule with its confidence level and Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRule {
    pub rule: Rule,
    pub a: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl LambdaRule {
    pub fn new(rule: Rule) -> Self {
        LambdaRule {
            rule,
            a: 0.05,
            mc_samples: 100_000,
            seed: 0,
        }
    }

    /// Evaluates the rule; group rules need `groups`.
    pub fn compute(&self, ds: &Dataset, groups: Option<&GroupStructure>) -> Result<f64> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::InvalidParameter(format!("a = {}", self.a)));
        }
        let need_groups = || groups.ok_or_else(|| Error::InvalidParameter("rule needs a group structure".into()));
        let (nr, n) = (ds.n_samples(), ds.n_features());
        match self.rule {
            Rule::Bel => Ok(lambda_bel(n, self.a)),
            Rule::StS => lambda_st(n, nr, self.a),
            Rule::StG => lambda_st(need_groups()?.len(), nr, self.a),
            Rule::Jia => Ok(lambda_jia(n, nr, self.a)),
            Rule::Bun => lambda_bun(ds, need_groups()?, self.a),
            Rule::BlS => lambda_blanchet(ds, None, self.a, self.mc_samples, self.seed),
            Rule::BlG => {
                let reg = Regularizer::sparse_group(need_groups()?.clone(), 0.0, 1.0)?;
                lambda_blanchet(ds, Some(&reg), self.a, self.mc_samples, self.seed)
            }
        }
    }
}

/// `1.1·Φ⁻¹(1 − a/(2n))`
pub fn lambda_bel(n: usize, a: f64) -> f64 {
    1.1 * norm_quantile(1.0 - a / (2.0 * n as f64))
}

/// `√2·t/Δ + √2(2 + √log(count))` with `t = √log(4/a)`, `Δ = √(1 − t√(4/N))`.
pub fn lambda_st(count: usize, n_samples: usize, a: f64) -> Result<f64> {
    let t = (4.0 / a).ln().sqrt();
    let d2 = 1.0 - t * (4.0 / n_samples as f64).sqrt();
    if d2 <= 0.0 {
        return Err(Error::InvalidRegime(format!(
            "1 − t√(4/N) = {d2} ≤ 0 for N = {n_samples}, a = {a}"
        )));
    }
    let s2 = std::f64::consts::SQRT_2;
    Ok(s2 * t / d2.sqrt() + s2 * (2.0 + (count as f64).ln().sqrt()))
}

/// `2.2·√(2 log n / (1 + t))` with `t = √(4 log(1/a)/N) + 4 log(1/a)/N`.
pub fn lambda_jia(n: usize, n_samples: usize, a: f64) -> f64 {
    let s = 4.0 * (1.0 / a).ln() / n_samples as f64;
    let t = s.sqrt() + s;
    2.2 * (2.0 * (n as f64).ln() / (1.0 + t)).sqrt()
}

/// Largest singular value of the columns `cols` of `X`, by power iteration on
/// the small Gram matrix.
pub fn spectral_norm_columns(ds: &Dataset, cols: &[usize]) -> f64 {
    let xg = ds.x.select_columns(cols);
    let g = xg.tr_mul(&xg);
    let k = cols.len();
    let mut v = nalgebra::DVector::from_fn(k, |i, _| 1.0 + (0.618_033_988_749_895 * (i + 1) as f64).fract());
    v /= v.norm();
    let mut lam = 0.0;
    for _ in 0..100_000 {
        let w = &g * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - lam).abs() <= 1e-13 * next {
            lam = next;
            break;
        }
        lam = next;
    }
    lam.max(0.0).sqrt()
}

/// `√(ζ_max τ₀ / (T_min τ₀ + N − T_max))·√N`.
pub fn lambda_bun(ds: &Dataset, groups: &GroupStructure, a: f64) -> Result<f64> {
    let nr = ds.n_samples() as f64;
    let sizes = groups.groups().iter().map(Vec::len);
    let t_max = sizes.clone().max().unwrap_or(0) as f64;
    let t_min = sizes.min().unwrap_or(0) as f64;
    if !(nr > t_max) {
        return Err(Error::InvalidRegime(format!("N = {nr} must exceed the largest group size {t_max}")));
    }
    let tau0 = f_quantile(1.0 - a / groups.len() as f64, t_min, nr - t_min);
    let denom = t_min * tau0 + nr - t_max;
    if !(denom > 0.0) {
        return Err(Error::InvalidRegime("T_min·τ₀ + N − T_max ≤ 0".into()));
    }
    let zeta = groups
        .groups()
        .par_iter()
        .map(|g| spectral_norm_columns(ds, g).powi(2) / nr)
        .reduce(|| 0.0, f64::max);
    Ok((zeta * tau0 / denom).sqrt() * nr.sqrt())
}

const MC_BATCH: usize = 1000;
const MC_MAX_ROWS: usize = 10_000;

/// Monte Carlo `√Q(1 − a)` of `(π/(π−2))·p_*(Z)²`, `Z ∼ N(0, XᵀX/N)`;
/// `p_* = ‖·‖_∞` when `reg` is `None`.
pub fn lambda_blanchet(
    ds: &Dataset,
    reg: Option<&Regularizer>,
    a: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if mc_samples < 1000 {
        return Err(Error::InvalidParameter(format!("mc_samples = {mc_samples} < 1000")));
    }
    let mut rng = rng_from_seed(seed);
    let rows: Vec<usize> = if ds.n_samples() > MC_MAX_ROWS {
        let mut r = sample(&mut rng, ds.n_samples(), MC_MAX_ROWS).into_vec();
        r.sort_unstable();
        r
    } else {
        (0..ds.n_samples()).collect()
    };
    let m = rows.len() as f64;
    let x = ds.x.select_rows(&rows).to_dense();
    let n = x.ncols();
    // Z = F w with F Fᵀ = Σ̂: the Cholesky factor when n ≤ m, else Xᵀ/√m.
    let factor: DMatrix<f64> = if n <= rows.len() {
        let sigma = x.tr_mul(&x) / m;
        match sigma.clone().cholesky() {
            Some(ch) => ch.unpack(),
            None => {
                let ridge = 1e-10 * sigma.trace() / n as f64;
                (sigma + DMatrix::identity(n, n) * ridge)
                    .cholesky()
                    .ok_or(Error::FactorizationFailure("ridged covariance"))?
                    .unpack()
            }
        }
    } else {
        x.transpose() / m.sqrt()
    };
    let k = factor.ncols();
    let c = std::f64::consts::PI / (std::f64::consts::PI - 2.0);
    let batches = mc_samples.div_ceil(MC_BATCH);
    let mut stats: Vec<f64> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut r = rng_from_seed(seed);
            r.set_stream(b as u64 + 1);
            let cols = MC_BATCH.min(mc_samples - b * MC_BATCH);
            let w = DMatrix::from_fn(k, cols, |_, _| r.sample::<f64, _>(StandardNormal));
            let z = &factor * w;
            (0..cols)
                .map(|j| {
                    let col = z.column(j);
                    let s = match reg {
                        None => norm_inf(col.as_slice()),
                        Some(reg) => dual_norm_general(col.as_slice(), reg),
                    };
                    c * s * s
                })
                .collect::<Vec<_>>()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let idx = (((1.0 - a) * mc_samples as f64).ceil() as usize).clamp(1, mc_samples) - 1;
    Ok(stats[idx].sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jia_limits() {
        let big = lambda_jia(100, usize::MAX / 2, 0.05);
        assert!((big - 2.2 * (2.0 * 100f64.ln()).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn st_regime_check() {
        assert!(matches!(lambda_st(10, 10, 0.05), Err(Error::InvalidRegime(_))));
        let far = lambda_st(10, usize::MAX / 2, 0.05).unwrap();
        let s2 = 2f64.sqrt();
        let limit = s2 * (80f64).ln().sqrt() + s2 * (2.0 + 10f64.ln().sqrt());
        assert!((far - limit).abs() < 1e-6);
    }

    #[test]
    fn bel_monotone() {
        assert!(lambda_bel(100, 0.05) < lambda_bel(200, 0.05));
        assert!((lambda_bel(100, 0.05) - 1.1 * 3.480756404).abs() < 1e-6);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("BlG".parse::<Rule>().unwrap(), Rule::BlG);
        assert!("cv".parse::<Rule>().is_err());
    }
}
