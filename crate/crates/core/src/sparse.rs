//! Minimal compressed-sparse-row complex matrix.
//!
//! Lattice operators have O(L) nonzeros per row; this keeps Hamiltonians,
//! jump operators and the ladder generator cheap to store and apply without
//! materializing D²×D² dense arrays.

use faer::Mat;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    /// Duplicates are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets<T>(nrows: usize, ncols: usize, triplets: T) -> Self
    where
        T: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}×{ncols}");
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut acc = C64::new(0.0, 0.0);
                while k < row.len() && row[k].0 == c {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != C64::new(0.0, 0.0) {
                    indices.push(c);
                    values.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &Mat<C64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        Self::from_triplets(
            r,
            c,
            (0..r).flat_map(|i| (0..c).map(move |j| (i, j, m[(i, j)]))).filter(|t| t.2 != C64::new(0.0, 0.0)),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().chain(other.triplets().map(|(i, j, v)| (i, j, v * s))),
        )
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    trip.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self · x` for a dense right factor.
    pub fn mul_dense(&self, x: &Mat<C64>) -> Mat<C64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = Mat::<C64>::zeros(self.nrows, x.ncols());
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for j in 0..x.ncols() {
                    out[(i, j)] += a * x[(k, j)];
                }
            }
        }
        out
    }

    /// `x · self` for a dense left factor.
    pub fn dense_mul(&self, x: &Mat<C64>) -> Mat<C64> {
        assert_eq!(x.ncols(), self.nrows);
        let mut out = Mat::<C64>::zeros(x.nrows(), self.ncols);
        for k in 0..self.nrows {
            for (j, b) in self.row(k) {
                for i in 0..x.nrows() {
                    out[(i, j)] += x[(i, k)] * b;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Diagonal entries if the matrix has no off-diagonal nonzeros.
    pub fn as_diagonal(&self) -> Option<Vec<C64>> {
        if self.nrows != self.ncols {
            return None;
        }
        let mut d = vec![C64::default(); self.nrows];
        for (i, j, v) in self.triplets() {
            if i != j {
                return None;
            }
            d[i] = v;
        }
        Some(d)
    }

    /// Dense restriction to the given rows and columns.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Mat<C64> {
        let mut pos = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            pos[c] = k;
        }
        let mut m = Mat::<C64>::zeros(rows.len(), cols.len());
        for (a, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    m[(a, pos[c])] = v;
                }
            }
        }
        m
    }
}

/// `‖AB − BA‖_max`.
pub fn commutator_norm(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    a.matmul(b).add_scaled(&b.matmul(a), C64::new(-1.0, 0.0)).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_cancellations() {
        let m = CsrMatrix::from_triplets(2, 2, [(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 1.0));
    }

    #[test]
    fn products_agree_with_dense() {
        let a = CsrMatrix::from_triplets(3, 3, [(0, 0, c(1.0, 2.0)), (1, 2, c(-1.0, 0.5)), (2, 1, c(0.0, 1.0))]);
        let b = CsrMatrix::from_triplets(3, 3, [(0, 2, c(2.0, 0.0)), (2, 0, c(1.0, -1.0)), (1, 1, c(3.0, 0.0))]);
        let dense = &a.to_dense() * &b.to_dense();
        let sparse = a.matmul(&b).to_dense();
        assert!((&dense - &sparse).norm_l2() < 1e-14);
        assert!((a.mul_dense(&b.to_dense()) - &dense).norm_l2() < 1e-14);
        assert!((b.dense_mul(&a.to_dense()) - &dense).norm_l2() < 1e-14);
        assert!(commutator_norm(&a, &CsrMatrix::identity(3)) == 0.0);
    }
}
