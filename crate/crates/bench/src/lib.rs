//! Fixtures shared by the criterion benches.

use sqrtreg::data::{generate_example1, generate_example2, rng_from_seed};
use sqrtreg::tuning::lambda_bun;
use sqrtreg::verify::random_vec;
use sqrtreg::{normalize_columns, Dataset, GroupStructure, Regularizer};

/// A normalized synthetic problem with its groups and `λ_Bun`.
pub struct Fixture {
    pub dataset: Dataset,
    pub groups: GroupStructure,
    pub lambda: f64,
}

impl Fixture {
    pub fn example1(n_samples: usize, g: usize, seed: u64) -> Self {
        let s = generate_example1(n_samples, g, seed).expect("valid example 1 sizes");
        Self::finish(s.dataset, s.groups)
    }

    pub fn example2(n_samples: usize, g: usize, seed: u64) -> Self {
        let s = generate_example2(n_samples, g, seed).expect("valid example 2 sizes");
        Self::finish(s.dataset, s.groups)
    }

    fn finish(ds: Dataset, groups: GroupStructure) -> Self {
        let dataset = normalize_columns(&ds).expect("no zero columns");
        let lambda = lambda_bun(&dataset, &groups, 0.05).expect("group rule");
        Fixture { dataset, groups, lambda }
    }

    pub fn sparse_group(&self, w1: f64) -> Regularizer {
        Regularizer::sparse_group(self.groups.clone(), w1, 1.0 - w1).expect("weights in [0, 1]")
    }

    pub fn fused(&self, w1: f64) -> Regularizer {
        Regularizer::fused(w1, 1.0 - w1).expect("weights in [0, 1]")
    }
}

/// Seeded `U(−scale, scale)` vector.
pub fn vector(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    random_vec(&mut rng_from_seed(seed), n, scale)
}

/// Piecewise-constant signal with noise, the typical input of the TV prox.
pub fn blocky_signal(n: usize, seed: u64) -> Vec<f64> {
    let noise = vector(n, 0.3, seed);
    noise
        .iter()
        .enumerate()
        .map(|(i, e)| ((i * 7 / n.max(1)) as f64 - 3.0) + e)
        .collect()
}
