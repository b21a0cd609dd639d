use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::rng_from_seed;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::model::{GroupStructure, Penalty, Regularizer, SolverConfig};
use crate::model::Dataset;
use crate::ppdna::ppa_solve;

/// Penalty shape whose weights `(w1, 1 − w1)` are tuned.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyFamily {
    SparseGroup(GroupStructure),
    Fused,
}

impl PenaltyFamily {
    pub fn regularizer(&self, w1: f64) -> Result<Regularizer> {
        let kind = match self {
            PenaltyFamily::SparseGroup(g) => Penalty::SparseGroup(g.clone()),
            PenaltyFamily::Fused => Penalty::Fused,
        };
        Regularizer::new(kind, w1, 1.0 - w1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid {
    pub lambdas: Vec<f64>,
    pub w1s: Vec<f64>,
}

impl CvGrid {
    /// `λ ∈ {10^{-1}, 10^{-0.95}, …, 10}`.
    pub fn default_lambdas() -> Vec<f64> {
        (0..=40).map(|k| 10f64.powf(-1.0 + 0.05 * k as f64)).collect()
    }

    /// `w1 ∈ {0, 0.1, …, 1}`.
    pub fn default_w1s() -> Vec<f64> {
        (0..=10).map(|k| k as f64 / 10.0).collect()
    }

    pub fn lambdas_only(w1: f64) -> Self {
        CvGrid {
            lambdas: Self::default_lambdas(),
            w1s: vec![w1],
        }
    }

    pub fn full() -> Self {
        CvGrid {
            lambdas: Self::default_lambdas(),
            w1s: Self::default_w1s(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub lambda: f64,
    pub w1: f64,
    /// Mean validation MSE over folds.
    pub mse: f64,
    pub fold_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best: CvCell,
    pub curve: Vec<CvCell>,
}

/// Fold label of each sample: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n_samples: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n_samples).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut fold = vec![0; n_samples];
    for (k, &i) in perm.iter().enumerate() {
        fold[i] = k % folds;
    }
    fold
}

fn mse(x: &Design, y: &[f64], beta: &[f64]) -> f64 {
    let p = x.mul(beta);
    p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn cross_validate(
    ds: &Dataset,
    family: &PenaltyFamily,
    grid: &CvGrid,
    folds: usize,
    seed: u64,
    base: &SolverConfig,
) -> Result<CvResult> {
    if folds < 2 || ds.n_samples() < folds {
        return Err(Error::InvalidParameter(format!(
            "need 2 ≤ folds ≤ N, got folds = {folds}, N = {}",
            ds.n_samples()
        )));
    }
    cross_validate_with_folds(ds, family, grid, &fold_assignment(ds.n_samples(), folds, seed), base)
}

/// Cross validation with explicit fold labels `0..K`.
pub fn cross_validate_with_folds(
    ds: &Dataset,
    family: &PenaltyFamily,
    grid: &CvGrid,
    fold_of: &[usize],
    base: &SolverConfig,
) -> Result<CvResult> {
    crate::error::check_len("fold labels", ds.n_samples(), fold_of.len())?;
    if grid.lambdas.is_empty() || grid.w1s.is_empty() {
        return Err(Error::InvalidParameter("empty CV grid".into()));
    }
    let k = fold_of.iter().max().map_or(0, |m| m + 1);
    let splits: Vec<(Dataset, Dataset)> = (0..k)
        .map(|f| {
            let tr: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
            let te: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
            (ds.select_rows(&tr), ds.select_rows(&te))
        })
        .collect();
    let cells: Vec<(f64, f64)> = grid
        .w1s
        .iter()
        .flat_map(|&w| grid.lambdas.iter().map(move |&l| (l, w)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let losses: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (lambda, w1) = cells[c];
            let reg = family.regularizer(w1)?;
            let mut cfg = base.clone();
            cfg.lambda = lambda;
            let (train, test) = &splits[f];
            let res = ppa_solve(train, &reg, &cfg)?;
            Ok(mse(&test.x, &test.y, &res.beta))
        })
        .collect();
    let mut curve = Vec::with_capacity(cells.len());
    let mut it = losses.into_iter();
    for &(lambda, w1) in &cells {
        let fold_mse = (0..k).map(|_| it.next().unwrap()).collect::<Result<Vec<f64>>>()?;
        let m = fold_mse.iter().sum::<f64>() / k as f64;
        curve.push(CvCell {
            lambda,
            w1,
            mse: m,
            fold_mse,
        });
    }
    let best = curve
        .iter()
        .min_by(|a, b| {
            a.mse
                .total_cmp(&b.mse)
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.w1.total_cmp(&b.w1))
        })
        .unwrap()
        .clone();
    Ok(CvResult { best, curve })
}

/// Percentage of test samples whose sign is predicted exactly.
pub fn classification_accuracy(beta: &[f64], x_test: &Design, y_test: &[f64]) -> f64 {
    let pred = x_test.mul(beta);
    let miss = pred
        .iter()
        .zip(y_test)
        .filter(|(p, y)| {
            let s = if **p > 0.0 {
                1.0
            } else if **p < 0.0 {
                -1.0
            } else {
                0.0
            };
            s != **y
        })
        .count();
    (1.0 - miss as f64 / y_test.len() as f64) * 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn accuracy_examples() {
        let x = Design::Dense(DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.0]));
        assert_eq!(classification_accuracy(&[1.0], &x, &[1.0, -1.0, 1.0]), 100.0 * 2.0 / 3.0);
        assert_eq!(classification_accuracy(&[-1.0], &x, &[1.0, -1.0, 0.0]), 0.0 + 100.0 / 3.0);
        let x = Design::Dense(DMatrix::from_row_slice(2, 1, &[1.0, -2.0]));
        assert_eq!(classification_accuracy(&[1.0], &x, &[1.0, -1.0]), 100.0);
        assert_eq!(classification_accuracy(&[-1.0], &x, &[1.0, -1.0]), 0.0);
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(20, 8, 3);
        for k in 0..8 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == 2 || c == 3);
        }
        assert_eq!(f, fold_assignment(20, 8, 3));
    }

    #[test]
    fn grid_shapes() {
        let l = CvGrid::default_lambdas();
        assert_eq!(l.len(), 41);
        assert!((l[0] - 0.1).abs() < 1e-15 && (l[40] - 10.0).abs() < 1e-12);
        assert_eq!(CvGrid::default_w1s().len(), 11);
    }
}
