use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::CsrMatrix;
use crate::{Error, Result};

/// Pivots smaller than this fraction of the row's infinity norm are replaced.
const PIVOT_GUARD: f64 = 1e-12;

/// Fill policy of an incomplete factorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Fill {
    /// Level-0: the factors keep the sparsity pattern of the input.
    Zero,
    /// Entries below `drop_tol` times the row infinity norm are dropped
    /// (diagonal always kept). `max_fill` optionally keeps only the largest
    /// entries of each triangle per row. `drop_tol = 0` with no cap is an
    /// exact factorization.
    Threshold { drop_tol: f64, max_fill: Option<usize> },
}

impl Fill {
    pub fn threshold(drop_tol: f64) -> Self {
        Fill::Threshold { drop_tol, max_fill: None }
    }

    /// No dropping at all.
    pub fn complete() -> Self {
        Self::threshold(0.0)
    }

    fn validate(&self) -> Result<()> {
        if let Fill::Threshold { drop_tol, .. } = *self {
            if !(drop_tol >= 0.0) || !drop_tol.is_finite() {
                return Err(Error::invalid(format!("fill tolerance must be >= 0, got {drop_tol}")));
            }
        }
        Ok(())
    }
}

impl Default for Fill {
    fn default() -> Self {
        Fill::Threshold { drop_tol: 1e-3, max_fill: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// `A ~ U^T D^-1 U`, only `U` stored.
    IncompleteCholesky,
    /// `A ~ L U` with unit lower `L`.
    IncompleteLu,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactorLog {
    /// Number of pivots replaced by the guard value.
    pub pivot_guards: usize,
    /// Number of entries discarded by the drop rule.
    pub dropped: usize,
}

/// Incomplete triangular factors with forward/backward application.
#[derive(Debug, Clone)]
pub struct InnerFactorization {
    kind: FactorKind,
    /// Strict lower part of `L` (ILU only).
    lower: CsrMatrix,
    /// Strict upper part of `U`.
    upper: CsrMatrix,
    diag: Vec<f64>,
    log: FactorLog,
}

impl InnerFactorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn log(&self) -> &FactorLog {
        &self.log
    }

    /// Strict lower factor; empty for incomplete Cholesky.
    pub fn lower(&self) -> &CsrMatrix {
        &self.lower
    }

    /// Strict upper factor.
    pub fn upper(&self) -> &CsrMatrix {
        &self.upper
    }

    /// Stored nonzeros counted as `nnz(L) + nnz(U) - n`, i.e. the size of a
    /// matrix with the combined pattern of both factors.
    pub fn nnz(&self) -> usize {
        match self.kind {
            FactorKind::IncompleteLu => self.lower.nnz() + self.upper.nnz() + self.dim(),
            FactorKind::IncompleteCholesky => 2 * self.upper.nnz() + self.dim(),
        }
    }

    /// `out ~ A^-1 r`
    pub fn apply(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if r.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch(format!("factor apply: dim {n}, r {}, out {}", r.len(), out.len())));
        }
        out.copy_from_slice(r);
        match self.kind {
            FactorKind::IncompleteLu => {
                for i in 0..n {
                    let mut s = out[i];
                    for (j, l) in self.lower.row_iter(i) {
                        s -= l * out[j];
                    }
                    out[i] = s;
                }
            }
            FactorKind::IncompleteCholesky => {
                // U^T y = r, then scale by D
                for k in 0..n {
                    let yk = out[k] / self.diag[k];
                    out[k] = yk;
                    for (j, u) in self.upper.row_iter(k) {
                        out[j] -= u * yk;
                    }
                }
                for (o, d) in out.iter_mut().zip(&self.diag) {
                    *o *= d;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = out[i];
            for (j, u) in self.upper.row_iter(i) {
                s -= u * out[j];
            }
            out[i] = s / self.diag[i];
        }
        Ok(())
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; r.len()];
        self.apply(r, &mut out)?;
        Ok(out)
    }
}

fn guard_pivot(pivot: f64, row_norm: f64, spd: bool, log: &mut FactorLog) -> f64 {
    let floor = PIVOT_GUARD * row_norm;
    if spd {
        if pivot <= floor {
            log.pivot_guards += 1;
            return pivot.abs().max(floor);
        }
        pivot
    } else if pivot.abs() < floor {
        log.pivot_guards += 1;
        if pivot < 0.0 {
            -floor
        } else {
            floor
        }
    } else {
        pivot
    }
}

/// Keeps at most `cap` entries of largest magnitude, returned sorted by column.
fn cap_entries(mut entries: Vec<(usize, f64)>, cap: Option<usize>, log: &mut FactorLog) -> Vec<(usize, f64)> {
    if let Some(cap) = cap {
        if entries.len() > cap {
            entries.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            log.dropped += entries.len() - cap;
            entries.truncate(cap);
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    entries
}

struct RowBuilder {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl RowBuilder {
    fn new() -> Self {
        Self { indptr: vec![0], indices: Vec::new(), data: Vec::new() }
    }

    fn push_row(&mut self, entries: &[(usize, f64)]) {
        for &(c, v) in entries {
            self.indices.push(c);
            self.data.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    fn finish(self, n: usize) -> CsrMatrix {
        CsrMatrix::from_parts_unchecked(n, n, self.indptr, self.indices, self.data)
    }
}

fn row_norm(a: &CsrMatrix, i: usize) -> f64 {
    let m = a.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Incomplete LU with threshold dropping (IKJ ordering, no pivoting).
pub fn ilu_factorize(a: &CsrMatrix, fill: Fill) -> Result<InnerFactorization> {
    fill.validate()?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("ILU needs a square matrix, got {:?}", a.shape())));
    }
    let n = a.nrows();
    let (zero_fill, tol, cap) = match fill {
        Fill::Zero => (true, 0.0, None),
        Fill::Threshold { drop_tol, max_fill } => (false, drop_tol, max_fill),
    };
    let mut log = FactorLog::default();
    let mut lower = RowBuilder::new();
    let mut upper = RowBuilder::new();
    let mut diag = vec![0.0; n];

    let mut w = vec![0.0; n];
    let mut in_pattern = vec![false; n];
    let mut in_a = vec![usize::MAX; n];
    let mut pattern: Vec<usize> = Vec::new();
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();

    for i in 0..n {
        let norm = row_norm(a, i);
        pattern.clear();
        for (j, v) in a.row_iter(i) {
            in_a[j] = i;
            in_pattern[j] = true;
            w[j] = v;
            pattern.push(j);
            if j < i {
                heap.push(Reverse(j));
            }
        }
        while let Some(Reverse(k)) = heap.pop() {
            // drop on the unscaled entry so L and U share the row's scale
            if !zero_fill && w[k].abs() < tol * norm {
                if w[k] != 0.0 {
                    log.dropped += 1;
                }
                w[k] = 0.0;
                continue;
            }
            let lik = w[k] / diag[k];
            w[k] = lik;
            // upper rows are already finalized and strictly upper
            let urow = upper_row(&upper, k);
            for (j, ukj) in urow {
                if !in_pattern[j] {
                    if zero_fill && in_a[j] != i {
                        continue;
                    }
                    in_pattern[j] = true;
                    w[j] = 0.0;
                    pattern.push(j);
                    if j < i {
                        heap.push(Reverse(j));
                    }
                }
                w[j] -= lik * ukj;
            }
        }
        let mut l_entries = Vec::new();
        let mut u_entries = Vec::new();
        let mut pivot = 0.0;
        for &j in &pattern {
            let v = w[j];
            if j == i {
                pivot = v;
            } else if v != 0.0 {
                if j < i {
                    l_entries.push((j, v));
                } else if zero_fill || v.abs() >= tol * norm {
                    u_entries.push((j, v));
                } else {
                    log.dropped += 1;
                }
            }
            in_pattern[j] = false;
            w[j] = 0.0;
        }
        diag[i] = guard_pivot(pivot, norm, false, &mut log);
        lower.push_row(&cap_entries(l_entries, cap, &mut log));
        upper.push_row(&cap_entries(u_entries, cap, &mut log));
    }
    if log.pivot_guards > 0 {
        log::warn!("ILU: {} pivot(s) replaced by guard value", log.pivot_guards);
    }
    Ok(InnerFactorization { kind: FactorKind::IncompleteLu, lower: lower.finish(n), upper: upper.finish(n), diag, log })
}

fn upper_row(u: &RowBuilder, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let (a, b) = (u.indptr[k], u.indptr[k + 1]);
    u.indices[a..b].iter().copied().zip(u.data[a..b].iter().copied())
}

/// Incomplete Cholesky (`A ~ U^T D^-1 U`) of a symmetric matrix. Only the
/// upper triangle of `a` is read.
pub fn ic_factorize(a: &CsrMatrix, fill: Fill) -> Result<InnerFactorization> {
    fill.validate()?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("IC needs a square matrix, got {:?}", a.shape())));
    }
    let n = a.nrows();
    let (zero_fill, tol, cap) = match fill {
        Fill::Zero => (true, 0.0, None),
        Fill::Threshold { drop_tol, max_fill } => (false, drop_tol, max_fill),
    };
    let mut log = FactorLog::default();
    let mut upper = RowBuilder::new();
    let mut diag = vec![0.0; n];
    // for each column j, the finalized rows k < j with U[k, j] != 0
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    let mut w = vec![0.0; n];
    let mut in_pattern = vec![false; n];
    let mut in_a = vec![usize::MAX; n];
    let mut pattern: Vec<usize> = Vec::new();

    for i in 0..n {
        let norm = row_norm(a, i);
        pattern.clear();
        in_pattern[i] = true;
        in_a[i] = i;
        w[i] = 0.0;
        pattern.push(i);
        for (j, v) in a.row_iter(i) {
            if j < i {
                continue;
            }
            in_a[j] = i;
            if !in_pattern[j] {
                in_pattern[j] = true;
                pattern.push(j);
            }
            w[j] = v;
        }
        for &(k, uki) in &columns[i] {
            let factor = uki / diag[k];
            let (cols, vals) = {
                let (s, e) = (upper.indptr[k], upper.indptr[k + 1]);
                (&upper.indices[s..e], &upper.data[s..e])
            };
            let start = cols.partition_point(|&c| c < i);
            for (&j, &ukj) in cols[start..].iter().zip(&vals[start..]) {
                if !in_pattern[j] {
                    if zero_fill && in_a[j] != i {
                        continue;
                    }
                    in_pattern[j] = true;
                    w[j] = 0.0;
                    pattern.push(j);
                }
                w[j] -= factor * ukj;
            }
        }
        let mut u_entries = Vec::new();
        let mut pivot = 0.0;
        for &j in &pattern {
            let v = w[j];
            if j == i {
                pivot = v;
            } else if v != 0.0 {
                if zero_fill || v.abs() >= tol * norm {
                    u_entries.push((j, v));
                } else {
                    log.dropped += 1;
                }
            }
            in_pattern[j] = false;
            w[j] = 0.0;
        }
        diag[i] = guard_pivot(pivot, norm, true, &mut log);
        let row = cap_entries(u_entries, cap, &mut log);
        for &(j, v) in &row {
            columns[j].push((i, v));
        }
        upper.push_row(&row);
        columns[i] = Vec::new();
    }
    if log.pivot_guards > 0 {
        log::warn!("IC: {} pivot(s) replaced by guard value", log.pivot_guards);
    }
    Ok(InnerFactorization {
        kind: FactorKind::IncompleteCholesky,
        lower: CsrMatrix::zeros(n, n),
        upper: upper.finish(n),
        diag,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn residual_norm(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x).unwrap();
        ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn diagonal_matrix_is_inverted_exactly() {
        let a = CsrMatrix::from_diagonal(&[2.0, -4.0, 0.5]);
        for f in [ilu_factorize(&a, Fill::Zero).unwrap(), ilu_factorize(&a, Fill::threshold(0.1)).unwrap()] {
            assert_eq!(f.solve(&[2.0, 4.0, 1.0]).unwrap(), vec![1.0, -1.0, 2.0]);
        }
        let a = CsrMatrix::from_diagonal(&[2.0, 4.0, 0.5]);
        let f = ic_factorize(&a, Fill::Zero).unwrap();
        assert_eq!(f.solve(&[2.0, 4.0, 1.0]).unwrap(), vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn tridiagonal_has_no_fill_and_is_exact() {
        let a = tridiag(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        for f in [
            ilu_factorize(&a, Fill::complete()).unwrap(),
            ilu_factorize(&a, Fill::Zero).unwrap(),
            ic_factorize(&a, Fill::complete()).unwrap(),
            ic_factorize(&a, Fill::Zero).unwrap(),
        ] {
            let x = f.solve(&b).unwrap();
            assert!(residual_norm(&a, &x, &b) <= 1e-12);
            assert_eq!(f.nnz(), a.nnz());
        }
    }

    #[test]
    fn complete_factorization_of_dense_pattern_is_exact_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { 10.0 } else { rng.random_range(-1.0..1.0) });
        let a = CsrMatrix::from_dense(&d);
        let f = ilu_factorize(&a, Fill::complete()).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let x = f.solve(&b).unwrap();
        let xo = d.lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - xo[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_ic_of_spd_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 15;
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let d = &m * m.transpose() + DMatrix::identity(n, n);
        let a = CsrMatrix::from_dense(&d);
        let f = ic_factorize(&a, Fill::complete()).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = f.solve(&b).unwrap();
        assert!(residual_norm(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn threshold_ilu_beats_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for _ in 0..6 {
                let j = rng.random_range(0..n);
                if j != i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    off += v.abs();
                    t.push((i, j, v));
                }
            }
            t.push((i, i, off + 1.0));
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = ilu_factorize(&a, Fill::threshold(1e-2)).unwrap();
        let x_ilu = f.solve(&b).unwrap();
        let diag = a.diagonal();
        let x_jac: Vec<f64> = b.iter().zip(&diag).map(|(b, d)| b / d).collect();
        assert!(residual_norm(&a, &x_ilu, &b) < residual_norm(&a, &x_jac, &b));
    }

    #[test]
    fn zero_pivot_is_guarded() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let f = ilu_factorize(&a, Fill::Zero).unwrap();
        assert_eq!(f.log().pivot_guards, 1);
        assert!(f.solve(&[1.0, 1.0]).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn negative_tolerance_rejected() {
        let a = CsrMatrix::identity(2);
        assert!(ilu_factorize(&a, Fill::threshold(-1.0)).is_err());
    }

    #[test]
    fn max_fill_caps_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 20;
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { 30.0 } else { rng.random_range(-1.0..1.0) });
        let a = CsrMatrix::from_dense(&d);
        let f = ilu_factorize(&a, Fill::Threshold { drop_tol: 0.0, max_fill: Some(3) }).unwrap();
        assert!(f.nnz() <= n * 7);
    }
}
