use nalgebra::DMatrix;

use crate::{Error, Result};

/// Compressed sparse row matrix with sorted column indices and no stored
/// exact zeros (diagonal entries excepted where a constructor says so).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw CSR arrays, validating the layout.
    pub fn new(nrows: usize, ncols: usize, indptr: Vec<usize>, indices: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if indptr.len() != nrows + 1 || indptr[0] != 0 {
            return Err(Error::invalid("row offsets must have nrows + 1 entries starting at 0"));
        }
        if indices.len() != data.len() || *indptr.last().unwrap() != indices.len() {
            return Err(Error::invalid("row offsets inconsistent with stored entries"));
        }
        for r in 0..nrows {
            if indptr[r] > indptr[r + 1] {
                return Err(Error::invalid(format!("row offsets decrease at row {r}")));
            }
            let cols = &indices[indptr[r]..indptr[r + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::invalid(format!("column indices not strictly increasing in row {r}")));
                }
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(Error::IndexOutOfRange { index: c, bound: ncols });
                }
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(indptr.len(), nrows + 1);
        Self { nrows, ncols, indptr, indices, data }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed in
    /// insertion order and exact zeros in the result are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_triplets_impl(nrows, ncols, triplets, false)
    }

    /// Like [`from_triplets`](Self::from_triplets) but keeps diagonal entries
    /// even when they sum to zero.
    pub fn from_triplets_keep_diag(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_triplets_impl(nrows, ncols, triplets, true)
    }

    fn from_triplets_impl(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
        keep_diag: bool,
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows {
                return Err(Error::IndexOutOfRange { index: r, bound: nrows });
            }
            if c >= ncols {
                return Err(Error::IndexOutOfRange { index: c, bound: ncols });
            }
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        // bucket by row, preserving insertion order
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c); // stable: duplicates keep insertion order
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 || (keep_diag && c == r) {
                    indices.push(c);
                    data.push(sum);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![1.0; n] }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: diag.to_vec() }
    }

    /// Drops exact zeros of a dense matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows: m.nrows(), ncols: m.ncols(), indptr, indices, data }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row_iter(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn row_iter(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(r);
        c.iter().copied().zip(v.iter().copied())
    }

    /// Stored value at `(r, c)`, zero when absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "spmv: matrix {}x{}, x {}, y {}",
                self.nrows,
                self.ncols,
                x.len(),
                y.len()
            )));
        }
        self.spmv_unchecked(x, y);
        Ok(())
    }

    pub(crate) fn spmv_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.data[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    /// `y += alpha A x`
    pub(crate) fn spmv_add_unchecked(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.data[k] * x[self.indices[k]];
            }
            *yr += alpha * s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv(x, &mut y)?;
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row_iter(r) {
                let k = next[c];
                indices[k] = r;
                data[k] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, data }
    }

    /// Sparse product `self * other` (row-wise Gustavson). Accumulation order
    /// within a row is fixed, so results are reproducible bit-for-bit.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} * {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![0.0; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            pattern.clear();
            for (k, a) in self.row_iter(r) {
                for (c, b) in other.row_iter(k) {
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = 0.0;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                if acc[c] != 0.0 {
                    indices.push(c);
                    data.push(acc[c]);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, data })
    }

    /// `self + alpha * other`. Exact zeros are dropped unless on the diagonal
    /// and `keep_diag` is set.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, keep_diag: bool) -> Result<CsrMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!("add: {:?} vs {:?}", self.shape(), other.shape())));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            let mut push = |c: usize, v: f64| {
                if v != 0.0 || (keep_diag && c == r) {
                    indices.push(c);
                    data.push(v);
                }
            };
            while i < ca.len() || j < cb.len() {
                if j == cb.len() || (i < ca.len() && ca[i] < cb[j]) {
                    push(ca[i], va[i]);
                    i += 1;
                } else if i == ca.len() || cb[j] < ca[i] {
                    push(cb[j], alpha * vb[j]);
                    j += 1;
                } else {
                    push(ca[i], va[i] + alpha * vb[j]);
                    i += 1;
                    j += 1;
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, data })
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Keeps entries for which `keep(row, col, value)` is true.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> CsrMatrix {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            for (c, v) in self.row_iter(r) {
                if keep(r, c, v) {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }
    }

    /// Adds `diag[i]` to entry `(i, i)`, inserting it when absent.
    pub fn add_diagonal(&self, diag: &[f64]) -> Result<CsrMatrix> {
        if diag.len() != self.nrows || self.nrows != self.ncols {
            return Err(Error::DimensionMismatch("add_diagonal needs a square matrix".into()));
        }
        self.add_scaled(1.0, &CsrMatrix::from_diagonal(diag), true)
    }

    /// Largest absolute entrywise difference, treating absent entries as zero.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> Result<f64> {
        let d = self.add_scaled(-1.0, other, false)?;
        Ok(d.data.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Same sparsity pattern as its transpose.
    pub fn is_structurally_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        t.indptr == self.indptr && t.indices == self.indices
    }

    /// Bitwise equal to its transpose.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.transpose() == *self
    }

    /// Row-wise infinity norms.
    pub fn row_inf_norms(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect()
    }

    /// Row-wise Euclidean norms.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> (CsrMatrix, DMatrix<f64>) {
        let mut dense = DMatrix::zeros(n, m);
        let mut trip = Vec::new();
        for r in 0..n {
            for c in 0..m {
                if rng.random::<f64>() < density {
                    let v = rng.random_range(-1.0..1.0);
                    dense[(r, c)] = v;
                    trip.push((r, c, v));
                }
            }
        }
        (CsrMatrix::from_triplets(n, m, &trip).unwrap(), dense)
    }

    #[test]
    fn identity_and_zero_spmv() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(CsrMatrix::identity(3).mul_vec(&x).unwrap(), x);
        assert_eq!(CsrMatrix::zeros(3, 3).mul_vec(&x).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn spmv_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, d) = random_sparse(&mut rng, 5, 5, 0.6);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = a.mul_vec(&x).unwrap();
        let yd = &d * nalgebra::DVector::from_vec(x);
        for i in 0..5 {
            assert!((y[i] - yd[i]).abs() <= 1e-14);
        }
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(a.mul_vec(&[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 0, 2.0), (0, 1, -1.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        let b = CsrMatrix::from_triplets_keep_diag(2, 2, &[(0, 0, 1.0), (0, 0, -1.0)]).unwrap();
        assert_eq!(b.nnz(), 1);
    }

    #[test]
    fn new_rejects_bad_layout() {
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn matmul_transpose_add_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, da) = random_sparse(&mut rng, 6, 4, 0.5);
        let (b, db) = random_sparse(&mut rng, 4, 7, 0.5);
        let c = a.matmul(&b).unwrap().to_dense();
        assert!((c - &da * &db).abs().max() < 1e-14);
        assert_eq!(a.transpose().to_dense(), da.transpose());
        let (e, de) = random_sparse(&mut rng, 6, 4, 0.5);
        let s = a.add_scaled(-2.0, &e, false).unwrap().to_dense();
        assert!((s - (&da - 2.0 * &de)).abs().max() < 1e-15);
    }

    #[test]
    fn symmetry_checks() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert!(a.is_symmetric());
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert!(b.is_structurally_symmetric());
        assert!(!b.is_symmetric());
    }
}
