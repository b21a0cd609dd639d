use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};
use sqrtreg::data::{
    generate_example1, generate_example2, generate_example3, load_csv, load_libsvm, random_group_assignment,
    read_libsvm, sample_toeplitz, split_indices, train_test_split, write_libsvm, Column,
};
use sqrtreg::tuning::dist::{beta_reg, f_cdf, f_quantile, norm_cdf, norm_quantile};
use sqrtreg::{normalize_columns, CscMatrix, Dataset, Design, Error};

#[test]
fn normal_quantile_against_statrs() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for p in [1e-300, 1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.99975, 1.0 - 1e-10] {
        let (a, b) = (norm_quantile(p), n.inverse_cdf(p));
        assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "p={p}: {a} vs {b}");
        assert!((norm_cdf(a) - p).abs() <= 1e-12 * p.max(1e-300) + 1e-15, "p={p}");
    }
    assert!((1.1 * norm_quantile(1.0 - 0.05 / 200.0) - 3.829).abs() < 5e-4);
}

#[test]
fn incomplete_beta_and_f_against_statrs() {
    for &(a, b) in &[(0.5, 0.5), (1.0, 3.0), (2.5, 7.0), (50.0, 450.0), (300.0, 20.0)] {
        for x in [1e-6, 0.01, 0.2, 0.5, 0.8, 0.999] {
            let (p, q) = (beta_reg(a, b, x), statrs::function::beta::beta_reg(a, b, x));
            assert!((p - q).abs() <= 1e-10, "I({a},{b},{x}): {p} vs {q}");
        }
    }
    for &(d1, d2) in &[(3.0, 10.0), (3.0, 997.0), (30.0, 30.0), (1.0, 1.0), (200.0, 5000.0)] {
        let f = FisherSnedecor::new(d1, d2).unwrap();
        for q in [0.01, 0.5, 0.95, 0.9999] {
            let (a, b) = (f_quantile(q, d1, d2), f.inverse_cdf(q));
            assert!((a - b).abs() <= 1e-7 * (1.0 + b), "F({d1},{d2}) q={q}: {a} vs {b}");
            assert!((f_cdf(a, d1, d2) - q).abs() <= 1e-10);
        }
    }
}

#[test]
fn toeplitz_recursion_equals_cholesky_factor() {
    let (n, rho) = (12, 0.5f64);
    let sigma = DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()));
    let l = sigma.cholesky().unwrap().unpack();
    let mut a = ChaCha8Rng::seed_from_u64(3);
    let mut b = a.clone();
    let mut x = vec![0.0; n];
    for _ in 0..20 {
        sample_toeplitz(&mut a, n, rho, &mut x);
        let z = nalgebra::DVector::from_iterator(n, (0..n).map(|_| b.sample::<f64, _>(StandardNormal)));
        let lz = &l * z;
        for i in 0..n {
            assert!((x[i] - lz[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn example_generators() {
    let e1 = generate_example1(1000, 10, 2).unwrap();
    let nz: Vec<usize> = (0..30).filter(|&j| e1.beta0[j] != 0.0).collect();
    assert_eq!(nz, vec![0, 1, 2, 6, 7, 8, 9, 10, 11]);
    let x = e1.dataset.x.to_dense();
    for j in 0..30 {
        let var = x.column(j).iter().map(|v| v * v).sum::<f64>() / 1000.0;
        assert!((var - 1.0).abs() < 4.0 / 1000f64.sqrt(), "column {j} variance {var}");
    }
    let again = generate_example1(1000, 10, 2).unwrap();
    assert_eq!(e1.dataset, again.dataset);

    let e2 = generate_example2(50, 8, 2).unwrap();
    let x = e2.dataset.x.to_dense();
    for l in 0..8 {
        for i in 0..50 {
            assert_eq!(x[(i, l + 8)], x[(i, l)] * x[(i, l)]);
        }
    }
    let groups: Vec<usize> = (0..8).filter(|&l| (0..3).any(|k| e2.beta0[l + 8 * k] != 0.0)).collect();
    assert_eq!(groups, vec![2, 5]);

    let e3 = generate_example3(50, 12, 3).unwrap();
    assert_eq!(e3.beta0.iter().filter(|v| **v != 0.0).count(), 7);
    let g12: Vec<f64> = (0..3).map(|k| e3.beta0[11 + 12 * k]).collect();
    assert_eq!(g12, vec![0.0, -1.0, 0.0]);
    assert_eq!(generate_example3(50, 12, 3).unwrap().dataset, e3.dataset);
    assert!(generate_example3(50, 11, 3).is_err());
}

#[test]
fn example2_noise_variance() {
    let s = generate_example2(20000, 6, 4).unwrap();
    let fit = s.dataset.x.mul(&s.beta0);
    let n = s.dataset.y.len() as f64;
    let var = s.dataset.y.iter().zip(&fit).map(|(y, f)| (y - f).powi(2)).sum::<f64>() / n;
    assert!((var - 4.0).abs() < 0.15, "{var}");
}

#[test]
fn libsvm_round_trip_is_lossless() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut trip = Vec::new();
    for i in 0..30 {
        for j in 0..12 {
            if rng.random_bool(0.3) {
                trip.push((i, j, rng.sample::<f64, _>(StandardNormal) * 1e3f64.powi(rng.random_range(-3..3))));
            }
        }
        trip.push((i, 11, std::f64::consts::PI * i as f64));
    }
    let x = CscMatrix::from_triplets(30, 12, &trip);
    let y: Vec<f64> = (0..30).map(|i| 1.0 / (i as f64 + 3.0)).collect();
    let ds = Dataset::new(Design::Sparse(x), y).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.svm");
    write_libsvm(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_libsvm(&path).unwrap();
    assert_eq!(back.y, ds.y);
    assert_eq!(back.x.to_dense(), ds.x.to_dense());
}

#[test]
fn libsvm_examples_and_errors() {
    let ds = read_libsvm("1.5 1:2 3:-1\n".as_bytes()).unwrap();
    assert_eq!(ds.y, vec![1.5]);
    assert_eq!(ds.x.to_dense().as_slice(), &[2.0, 0.0, -1.0]);
    assert!(matches!(read_libsvm("".as_bytes()), Err(Error::EmptyDataset)));
    assert!(matches!(read_libsvm("1 0:3\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.svm");
    assert!(matches!(load_libsvm(&missing), Err(Error::Io(_))));
}

#[test]
fn csv_loader_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "a,b,y\n1,2,3\n4,5,6\n").unwrap();
    let ds = load_csv(&path, &Column::Index(2), true).unwrap();
    assert_eq!(ds.y, vec![3.0, 6.0]);
    assert_eq!(ds.x.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 5.0]));
}

#[test]
fn group_assignment_is_uniform() {
    let g = 10;
    let gs = random_group_assignment(10_000, g, 6).unwrap();
    assert_eq!(gs.len(), g);
    let expected = 10_000.0 / g as f64;
    let chi2: f64 = gs.groups().iter().map(|grp| (grp.len() as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((g - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    for (grp, w) in gs.iter() {
        assert!((w - (grp.len() as f64).sqrt()).abs() < 1e-15);
    }
    let one = random_group_assignment(7, 1, 0).unwrap();
    assert_eq!(one.len(), 1);
    assert!((one.weights()[0] - 7f64.sqrt()).abs() < 1e-15);
    assert!(random_group_assignment(7, 7, 0).unwrap().len() <= 7);
}

#[test]
fn splits() {
    let (tr, te) = split_indices(3, 1);
    assert_eq!((tr.len(), te.len()), (2, 1));
    let (tr, te) = split_indices(100, 2);
    let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert_eq!(split_indices(100, 2), (tr, te));
    let ds = generate_example1(9, 4, 0).unwrap().dataset;
    let (a, b) = train_test_split(&ds, 0).unwrap();
    assert_eq!((a.n_samples(), b.n_samples()), (6, 3));
}

#[test]
fn normalization_is_idempotent_on_random_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let nr = rng.random_range(2..30);
        let nc = rng.random_range(1..30);
        let x = DMatrix::from_fn(nr, nc, |_, _| rng.random_range(-3.0..3.0));
        let ds = Dataset::new(x, vec![0.0; nr]).unwrap();
        let once = normalize_columns(&ds).unwrap();
        let twice = normalize_columns(&once).unwrap();
        let (a, b) = (once.x.to_dense(), twice.x.to_dense());
        assert!((a.clone() - b).amax() <= 1e-15 * a.amax());
        for j in 0..nc {
            let d = a.column(j).iter().map(|v| v * v).sum::<f64>() / nr as f64;
            assert!((d - 1.0).abs() < 1e-12);
        }
    }
}
