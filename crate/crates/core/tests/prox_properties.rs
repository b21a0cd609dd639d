use proptest::prelude::*;
use sqrtreg::dro::dual_seminorm;
use sqrtreg::prox::{prox_fused, prox_l2, prox_sparse_group, prox_sqrt_loss, tv_denoise};
use sqrtreg::vecops::{dist2, dot, norm2, sub};
use sqrtreg::verify::{prox_oracle, random_regularizer};
use sqrtreg::{GroupStructure, Penalty, Regularizer};

fn regularizer(fused: bool, n: usize, seed: u64) -> Regularizer {
    let mut rng = sqrtreg::data::rng_from_seed(seed);
    random_regularizer(&mut rng, fused, n)
}

fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-5.0..5.0f64, n), prop::collection::vec(-5.0..5.0f64, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prox_is_firmly_nonexpansive(
        n in 1usize..15, fused in any::<bool>(), seed in any::<u64>(),
        kappa in 0.01..3.0f64, xs in vec_pair(15),
    ) {
        let reg = regularizer(fused, n, seed);
        let (x, y) = (&xs.0[..n], &xs.1[..n]);
        let (px, py) = (reg.prox(x, kappa), reg.prox(y, kappa));
        let dp = sub(&px, &py);
        let lhs = dot(&dp, &dp);
        let rhs = dot(&dp, &sub(x, y));
        prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn prox_matches_dual_oracle(
        n in 1usize..13, fused in any::<bool>(), seed in any::<u64>(),
        kappa in 0.01..3.0f64, xs in vec_pair(13),
    ) {
        let reg = regularizer(fused, n, seed);
        let x = &xs.0[..n];
        prop_assert!(dist2(&reg.prox(x, kappa), &prox_oracle(x, &reg, kappa)) < 1e-6);
    }

    #[test]
    fn prox_minimizes_the_prox_objective(
        n in 1usize..10, fused in any::<bool>(), seed in any::<u64>(),
        kappa in 0.01..3.0f64, xs in vec_pair(10),
    ) {
        let reg = regularizer(fused, n, seed);
        let (x, d) = (&xs.0[..n], &xs.1[..n]);
        let obj = |y: &[f64]| kappa * reg.value(y) + 0.5 * dist2(x, y).powi(2);
        let p = reg.prox(x, kappa);
        let best = obj(&p);
        for t in [1e-3, 1e-2, 1e-1] {
            let q: Vec<f64> = p.iter().zip(d).map(|(a, b)| a + t * b).collect();
            prop_assert!(best <= obj(&q) + 1e-12);
        }
    }

    #[test]
    fn moreau_decomposition_for_the_loss(
        n in 1usize..10, kappa in 0.01..3.0f64, xs in vec_pair(10),
    ) {
        let x = &xs.0[..n];
        let p = prox_sqrt_loss(x, kappa);
        let scaled: Vec<f64> = x.iter().map(|v| v / kappa).collect();
        let nb = norm2(&scaled);
        let proj: Vec<f64> = scaled.iter().map(|v| if nb <= 1.0 { *v } else { v / nb }).collect();
        for i in 0..n {
            prop_assert!((x[i] - p[i] - kappa * proj[i]).abs() <= 1e-12 * (1.0 + x[i].abs()));
        }
    }

    #[test]
    fn prox_homogeneity(
        n in 1usize..12, fused in any::<bool>(), seed in any::<u64>(),
        kappa in 0.01..2.0f64, t in 0.1..10.0f64, xs in vec_pair(12),
    ) {
        let reg = regularizer(fused, n, seed);
        let x = &xs.0[..n];
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let a = reg.prox(&tx, t * kappa);
        let b: Vec<f64> = reg.prox(x, kappa).iter().map(|v| t * v).collect();
        prop_assert!(dist2(&a, &b) <= 1e-9 * (1.0 + norm2(&b)));
    }

    #[test]
    fn penalty_is_a_seminorm(
        n in 1usize..12, fused in any::<bool>(), seed in any::<u64>(),
        t in -5.0..5.0f64, xs in vec_pair(12),
    ) {
        let reg = regularizer(fused, n, seed);
        let (x, y) = (&xs.0[..n], &xs.1[..n]);
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        prop_assert!((reg.value(&tx) - t.abs() * reg.value(x)).abs() <= 1e-10 * (1.0 + reg.value(&tx)));
        let s: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        prop_assert!(reg.value(&s) <= reg.value(x) + reg.value(y) + 1e-10);
    }

    #[test]
    fn cauchy_schwarz_for_the_dual_seminorm(
        n in 1usize..10, fused in any::<bool>(), seed in any::<u64>(), xs in vec_pair(10),
    ) {
        let reg = regularizer(fused, n, seed);
        let (a, b) = (&xs.0[..n], &xs.1[..n]);
        let ps = dual_seminorm(a, &reg).unwrap();
        if ps.is_finite() {
            prop_assert!(dot(a, b) <= ps * reg.value(b) + 1e-8 * (1.0 + ps * reg.value(b)));
        }
    }

    #[test]
    fn tv_output_preserves_the_mean(
        n in 1usize..40, kappa in 0.0..5.0f64, xs in prop::collection::vec(-5.0..5.0f64, 40),
    ) {
        let x = &xs[..n];
        let z = tv_denoise(x, kappa);
        let (mx, mz) = (x.iter().sum::<f64>(), z.iter().sum::<f64>());
        prop_assert!((mx - mz).abs() <= 1e-9 * (1.0 + mx.abs()));
    }
}

#[test]
fn six_coordinates_two_groups_against_oracle() {
    let g = GroupStructure::with_size_weights(vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
    let reg = Regularizer::sparse_group(g, 0.4, 0.6).unwrap();
    let mut rng = sqrtreg::data::rng_from_seed(11);
    for _ in 0..50 {
        let x = sqrtreg::verify::random_vec(&mut rng, 6, 3.0);
        let p = prox_sparse_group(&x, &reg, 0.7).unwrap();
        assert!(dist2(&p, &prox_oracle(&x, &reg, 0.7)) < 1e-6);
    }
}

#[test]
fn eight_coordinates_fused_against_oracle() {
    let reg = Regularizer::fused(0.3, 0.7).unwrap();
    let mut rng = sqrtreg::data::rng_from_seed(12);
    for _ in 0..50 {
        let x = sqrtreg::verify::random_vec(&mut rng, 8, 3.0);
        let p = prox_fused(&x, &reg, 0.9).unwrap();
        assert!(dist2(&p, &prox_oracle(&x, &reg, 0.9)) < 1e-6);
    }
}

#[test]
fn constant_input_only_soft_thresholds() {
    let reg = Regularizer::fused(0.5, 0.5).unwrap();
    let p = prox_fused(&[2.0; 5], &reg, 1.0).unwrap();
    assert!(p.iter().all(|v| (v - 1.5).abs() < 1e-14));
}

#[test]
fn wrong_penalty_kind_is_rejected() {
    let reg = Regularizer::fused(0.5, 0.5).unwrap();
    assert!(prox_sparse_group(&[1.0, 2.0], &reg, 1.0).is_err());
    let g = GroupStructure::single(2).unwrap();
    let reg = Regularizer::new(Penalty::SparseGroup(g), 0.5, 0.5).unwrap();
    assert!(prox_fused(&[1.0, 2.0], &reg, 1.0).is_err());
}

#[test]
fn loss_prox_halves_at_twice_the_radius() {
    let p = prox_l2(&[6.0, 8.0], 5.0);
    assert!((p[0] - 3.0).abs() < 1e-15 && (p[1] - 4.0).abs() < 1e-15);
}
