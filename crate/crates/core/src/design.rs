//! Design matrices: dense column-major or compressed sparse column.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::vecops::dot;

const PAR_WORK: usize = 1 << 18;

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed,
    /// explicit zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.1, t.0));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut m = CscMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        };
        m.drop_zeros();
        m
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
    }

    fn drop_zeros(&mut self) {
        let mut ptr = vec![0usize; self.ncols + 1];
        let mut k = 0;
        for c in 0..self.ncols {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                if self.values[p] != 0.0 {
                    self.row_idx[k] = self.row_idx[p];
                    self.values[k] = self.values[p];
                    k += 1;
                }
            }
            ptr[c + 1] = k;
        }
        self.row_idx.truncate(k);
        self.values.truncate(k);
        self.col_ptr = ptr;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }
}

/// The design matrix `X` (N samples × n features).
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl From<DMatrix<f64>> for Design {
    fn from(m: DMatrix<f64>) -> Self {
        Design::Dense(m)
    }
}

impl From<CscMatrix> for Design {
    fn from(m: CscMatrix) -> Self {
        Design::Sparse(m)
    }
}

impl Design {
    pub fn nrows(&self) -> usize {
        match self {
            Design::Dense(m) => m.nrows(),
            Design::Sparse(m) => m.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Design::Dense(m) => m.ncols(),
            Design::Sparse(m) => m.ncols,
        }
    }

    /// Dense column slice; `None` for sparse storage.
    #[inline]
    fn dense_col(m: &DMatrix<f64>, j: usize) -> &[f64] {
        let n = m.nrows();
        &m.as_slice()[j * n..(j + 1) * n]
    }

    /// `⟨X_j, u⟩`
    #[inline]
    pub fn col_dot(&self, j: usize, u: &[f64]) -> f64 {
        match self {
            Design::Dense(m) => dot(Self::dense_col(m, j), u),
            Design::Sparse(m) => {
                let (ri, v) = m.column(j);
                ri.iter().zip(v).map(|(&i, &x)| x * u[i]).sum()
            }
        }
    }

    /// `y += a X_j`
    #[inline]
    pub fn col_axpy(&self, j: usize, a: f64, y: &mut [f64]) {
        match self {
            Design::Dense(m) => crate::vecops::axpy(a, Self::dense_col(m, j), y),
            Design::Sparse(m) => {
                let (ri, v) = m.column(j);
                for (&i, &x) in ri.iter().zip(v) {
                    y[i] += a * x;
                }
            }
        }
    }

    /// Number of stored entries touched by one column operation.
    #[inline]
    pub fn col_len(&self, j: usize) -> usize {
        match self {
            Design::Dense(m) => m.nrows(),
            Design::Sparse(m) => m.col_ptr[j + 1] - m.col_ptr[j],
        }
    }

    pub fn col_sq_norm(&self, j: usize) -> f64 {
        match self {
            Design::Dense(m) => {
                let c = Self::dense_col(m, j);
                dot(c, c)
            }
            Design::Sparse(m) => m.column(j).1.iter().map(|x| x * x).sum(),
        }
    }

    /// `X b`, skipping zero entries of `b`.
    pub fn mul(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.ncols());
        let mut out = vec![0.0; self.nrows()];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                self.col_axpy(j, bj, &mut out);
            }
        }
        out
    }

    /// `Xᵀ u`
    pub fn tr_mul(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.nrows());
        let n = self.ncols();
        if n * self.nrows() >= PAR_WORK {
            (0..n).into_par_iter().map(|j| self.col_dot(j, u)).collect()
        } else {
            (0..n).map(|j| self.col_dot(j, u)).collect()
        }
    }

    /// Multiplies column `j` by `d[j]`.
    pub fn scale_columns(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.ncols());
        match self {
            Design::Dense(m) => {
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    col *= d[j];
                }
            }
            Design::Sparse(m) => {
                for (j, &dj) in d.iter().enumerate() {
                    for p in m.col_ptr[j]..m.col_ptr[j + 1] {
                        m.values[p] *= dj;
                    }
                }
            }
        }
    }

    /// Submatrix made of the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Design {
        match self {
            Design::Dense(m) => Design::Dense(m.select_rows(rows.iter())),
            Design::Sparse(m) => {
                let mut pos = vec![Vec::new(); m.nrows];
                for (new, &old) in rows.iter().enumerate() {
                    pos[old].push(new);
                }
                let mut t = Vec::new();
                for j in 0..m.ncols {
                    let (ri, v) = m.column(j);
                    for (&i, &x) in ri.iter().zip(v) {
                        for &new in &pos[i] {
                            t.push((new, j, x));
                        }
                    }
                }
                Design::Sparse(CscMatrix::from_triplets(rows.len(), m.ncols, &t))
            }
        }
    }

    /// Submatrix made of the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        let nr = self.nrows();
        let mut out = DMatrix::zeros(nr, cols.len());
        for (k, &j) in cols.iter().enumerate() {
            let mut c = vec![0.0; nr];
            self.col_axpy(j, 1.0, &mut c);
            out.column_mut(k).copy_from_slice(&c);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Design::Dense(m) => m.clone(),
            Design::Sparse(_) => self.select_columns(&(0..self.ncols()).collect::<Vec<_>>()),
        }
    }

    /// Squared Euclidean norms of the rows.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows()];
        match self {
            Design::Dense(m) => {
                for col in m.column_iter() {
                    for (o, x) in out.iter_mut().zip(col.iter()) {
                        *o += x * x;
                    }
                }
            }
            Design::Sparse(m) => {
                for (&i, &x) in m.row_idx.iter().zip(&m.values) {
                    out[i] += x * x;
                }
            }
        }
        out
    }

    /// Row `i` as a dense vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols())
            .map(|j| match self {
                Design::Dense(m) => m[(i, j)],
                Design::Sparse(m) => {
                    let (ri, v) = m.column(j);
                    ri.binary_search(&i).map(|p| v[p]).unwrap_or(0.0)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 2.0, 0.0, 0.0, -1.0, 0.0, 3.0, 4.0, 0.0, 0.5, 0.0])
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let d = Design::Dense(sample());
        let s = Design::Sparse(CscMatrix::from_dense(&sample()));
        let b = [1.0, -2.0, 0.5, 3.0];
        let u = [0.3, -1.0, 2.0];
        assert_eq!(d.mul(&b), s.mul(&b));
        assert_eq!(d.tr_mul(&u), s.tr_mul(&u));
        assert_eq!(d.row_sq_norms(), s.row_sq_norms());
        assert_eq!(s.to_dense(), sample());
        assert_eq!(s.row(2), vec![4.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 0.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.column(0), (&[0usize][..], &[3.0][..]));
    }

    #[test]
    fn row_selection_matches_dense() {
        let d = Design::Dense(sample());
        let s = Design::Sparse(CscMatrix::from_dense(&sample()));
        let rows = [2, 0, 2];
        assert_eq!(d.select_rows(&rows).to_dense(), s.select_rows(&rows).to_dense());
    }
}
