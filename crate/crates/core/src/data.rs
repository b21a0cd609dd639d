//! Synthetic examples, file loaders, random groupings and splits.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::{CscMatrix, Design};
use crate::error::{Error, Result};
use crate::model::{Dataset, GroupStructure};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

impl std::str::FromStr for Example {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(Example::Ex1),
            "ex2" => Ok(Example::Ex2),
            "ex3" => Ok(Example::Ex3),
            _ => Err(Error::InvalidParameter(format!("unknown example {s:?}"))),
        }
    }
}

/// A synthetic instance with `n = 3g` features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub example: Example,
    pub n_samples: usize,
    pub g: usize,
    pub seed: u64,
    pub toeplitz_base: f64,
}

/// Generated instance: data, groups, and the true coefficients.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub groups: GroupStructure,
    pub beta0: Vec<f64>,
}

impl SyntheticSpec {
    pub fn new(example: Example, n_samples: usize, g: usize, seed: u64) -> Self {
        SyntheticSpec {
            example,
            n_samples,
            g,
            seed,
            toeplitz_base: 0.5,
        }
    }

    pub fn generate(&self) -> Result<Synthetic> {
        let min_g = match self.example {
            Example::Ex1 => 4,
            Example::Ex2 => 6,
            Example::Ex3 => 12,
        };
        if self.g < min_g || self.n_samples == 0 {
            return Err(Error::InvalidParameter(format!(
                "{:?} needs g ≥ {min_g} and N ≥ 1",
                self.example
            )));
        }
        if !(self.toeplitz_base.abs() < 1.0) {
            return Err(Error::InvalidParameter("Toeplitz base must lie in (−1, 1)".into()));
        }
        match self.example {
            Example::Ex1 => Ok(example1(self)),
            Example::Ex2 | Example::Ex3 => Ok(example23(self)),
        }
    }
}

/// Draws `x ∼ N(0, Σ)` with `Σ_ij = ρ^|i−j|`.
///
/// Applies the Cholesky factor of the Toeplitz matrix, which for this
/// covariance is the first-order recursion below.
pub fn sample_toeplitz(rng: &mut impl Rng, n: usize, rho: f64, out: &mut [f64]) {
    let c = (1.0 - rho * rho).sqrt();
    let mut prev = 0.0;
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let z: f64 = rng.sample(StandardNormal);
        prev = if i == 0 { z } else { rho * prev + c * z };
        *o = prev;
    }
}

fn example1(spec: &SyntheticSpec) -> Synthetic {
    let (nr, g) = (spec.n_samples, spec.g);
    let n = 3 * g;
    let mut rng = rng_from_seed(spec.seed);
    let mut x = DMatrix::zeros(nr, n);
    let mut row = vec![0.0; n];
    for i in 0..nr {
        sample_toeplitz(&mut rng, n, spec.toeplitz_base, &mut row);
        for j in 0..n {
            x[(i, j)] = row[j];
        }
    }
    let mut beta0 = vec![0.0; n];
    for l in [0usize, 2, 3] {
        beta0[3 * l..3 * l + 3].fill(2.5);
    }
    let groups = GroupStructure::contiguous(n, 3).expect("valid contiguous groups");
    finish(x, beta0, groups, 1.0, &mut rng)
}

fn example23(spec: &SyntheticSpec) -> Synthetic {
    let (nr, g) = (spec.n_samples, spec.g);
    let n = 3 * g;
    let mut rng = rng_from_seed(spec.seed);
    let omega: f64 = rng.sample(StandardNormal);
    let mut x = DMatrix::zeros(nr, n);
    let mut z = vec![0.0; g];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..nr {
        sample_toeplitz(&mut rng, g, spec.toeplitz_base, &mut z);
        for l in 0..g {
            let a = (z[l] + omega) * s;
            x[(i, l)] = a;
            x[(i, l + g)] = a * a;
            x[(i, l + 2 * g)] = a * a * a;
        }
    }
    let mut beta0 = vec![0.0; n];
    let mut set = |l: usize, v: [f64; 3]| {
        for (k, vk) in v.into_iter().enumerate() {
            beta0[l - 1 + k * g] = vk;
        }
    };
    if spec.example == Example::Ex2 {
        set(3, [1.0, 1.0, 1.0]);
        set(6, [2.0 / 3.0, -1.0, 0.5]);
    } else {
        set(3, [1.0, 0.0, 1.0]);
        set(6, [2.0 / 3.0, -1.0, 0.0]);
        set(9, [-1.0, 0.0, -0.5]);
        set(12, [0.0, -1.0, 0.0]);
    }
    let groups = GroupStructure::with_size_weights((0..g).map(|l| vec![l, l + g, l + 2 * g]).collect())
        .expect("valid strided groups");
    finish(x, beta0, groups, 2.0, &mut rng)
}

fn finish(x: DMatrix<f64>, beta0: Vec<f64>, groups: GroupStructure, sigma: f64, rng: &mut ChaCha8Rng) -> Synthetic {
    let design = Design::Dense(x);
    let mut y = design.mul(&beta0);
    for yi in &mut y {
        let e: f64 = rng.sample(StandardNormal);
        *yi += sigma * e;
    }
    Synthetic {
        dataset: Dataset {
            x: design,
            y,
            normalized: false,
        },
        groups,
        beta0,
    }
}

pub fn generate_example1(n_samples: usize, g: usize, seed: u64) -> Result<Synthetic> {
    SyntheticSpec::new(Example::Ex1, n_samples, g, seed).generate()
}

pub fn generate_example2(n_samples: usize, g: usize, seed: u64) -> Result<Synthetic> {
    SyntheticSpec::new(Example::Ex2, n_samples, g, seed).generate()
}

pub fn generate_example3(n_samples: usize, g: usize, seed: u64) -> Result<Synthetic> {
    SyntheticSpec::new(Example::Ex3, n_samples, g, seed).generate()
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

/// Reads `<label> <index>:<value> ...` lines with 1-based feature indices.
pub fn read_libsvm(reader: impl BufRead) -> Result<Dataset> {
    let mut y = Vec::new();
    let mut trip = Vec::new();
    let mut ncols = 0;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let label = parse_num(toks.next().unwrap(), lineno)?;
        let row = y.len();
        y.push(label);
        for t in toks {
            let (i, v) = t.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected index:value, got {t:?}"),
            })?;
            let idx: usize = i.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad index {i:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "indices are 1-based".into(),
                });
            }
            ncols = ncols.max(idx);
            trip.push((row, idx - 1, parse_num(v, lineno)?));
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = CscMatrix::from_triplets(y.len(), ncols, &trip);
    Dataset::new(x, y)
}

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    read_libsvm(BufReader::new(std::fs::File::open(path)?))
}

/// Writes the sparse text format with round-trip precision.
pub fn write_libsvm(ds: &Dataset, mut w: impl Write) -> Result<()> {
    let x = match &ds.x {
        Design::Sparse(s) => s.clone(),
        Design::Dense(m) => CscMatrix::from_dense(m),
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ds.n_samples()];
    for j in 0..ds.n_features() {
        let (ri, v) = x.column(j);
        for (&i, &a) in ri.iter().zip(v) {
            rows[i].push((j, a));
        }
    }
    for (yi, row) in ds.y.iter().zip(&rows) {
        write!(w, "{yi}")?;
        for (j, a) in row {
            write!(w, " {}:{a}", j + 1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Response column of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Index(usize),
    Name(String),
}

/// Reads a comma-separated file into a dense dataset.
pub fn read_csv(reader: impl BufRead, response: &Column, has_header: bool) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let mut resp = match response {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    if has_header {
        if let Some((_, h)) = lines.next() {
            let h = h?;
            if let Column::Name(name) = response {
                resp = h.split(',').position(|c| c.trim() == name);
            }
        }
    }
    let resp = resp.ok_or_else(|| Error::InvalidParameter(format!("response column {response:?} not found")))?;
    let mut y = Vec::new();
    let mut vals = Vec::new();
    let mut width = None;
    for (k, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if *width.get_or_insert(cells.len()) != cells.len() || resp >= cells.len() {
            return Err(Error::Parse {
                line: k + 1,
                msg: "ragged row".into(),
            });
        }
        for (c, cell) in cells.iter().enumerate() {
            let v = parse_num(cell.trim(), k + 1)?;
            if c == resp {
                y.push(v);
            } else {
                vals.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = width.unwrap() - 1;
    Dataset::new(DMatrix::from_row_slice(y.len(), n, &vals), y)
}

pub fn load_csv(path: impl AsRef<Path>, response: &Column, has_header: bool) -> Result<Dataset> {
    read_csv(BufReader::new(std::fs::File::open(path)?), response, has_header)
}

/// Assigns every feature to one of `g` groups uniformly at random; empty
/// groups are dropped.
pub fn random_group_assignment(n: usize, g: usize, seed: u64) -> Result<GroupStructure> {
    if g == 0 || g > n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ g ≤ n, got g = {g}, n = {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
    GroupStructure::from_labels(&labels)
}

/// Shuffled `(train, test)` indices with `⌈2N/3⌉` training rows.
pub fn split_indices(n_samples: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n_samples).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let n_train = (2 * n_samples).div_ceil(3);
    let test = idx.split_off(n_train);
    (idx, test)
}

pub fn train_test_split(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds.n_samples() < 3 {
        return Err(Error::InvalidParameter("need at least 3 samples to split".into()));
    }
    let (tr, te) = split_indices(ds.n_samples(), seed);
    Ok((ds.select_rows(&tr), ds.select_rows(&te)))
}
