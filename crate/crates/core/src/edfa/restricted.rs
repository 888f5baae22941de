use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::sparse::{extract_principal_submatrix, CsrMatrix, IndexSet};
use crate::{Error, Result};

/// Sparse right-hand side: sorted indices with values.
#[derive(Debug, Clone, Copy)]
pub struct SparseRhs<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> SparseRhs<'a> {
    pub fn new(indices: &'a [usize], values: &'a [f64]) -> Self {
        Self { indices, values }
    }

    /// Row `r` of a CSR matrix.
    pub fn row(a: &'a CsrMatrix, r: usize) -> Self {
        let (indices, values) = a.row(r);
        Self { indices, values }
    }

    /// `R b`, i.e. the entries of `b` on `q` in the order of `q`.
    fn restrict(&self, q: &IndexSet) -> DVector<f64> {
        let mut out = DVector::zeros(q.len());
        for (&i, &v) in self.indices.iter().zip(self.values) {
            if let Some(pos) = q.position(i) {
                out[pos] = v;
            }
        }
        out
    }
}

/// Cholesky of `-A^(m) = -R A R^T` on one index set.
pub struct RestrictedSolver {
    q: IndexSet,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl RestrictedSolver {
    /// Factors `-R A R^T`; `a` must be symmetric negative definite on `q`.
    pub fn new(a: &CsrMatrix, q: IndexSet) -> Result<Self> {
        if q.is_empty() {
            return Ok(Self { q, chol: None });
        }
        let m: DMatrix<f64> = -extract_principal_submatrix(a, &q, &q)?;
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Factorization(format!("restricted block of size {} is not definite", q.len())))?;
        Ok(Self { q, chol: Some(chol) })
    }

    pub fn pattern(&self) -> &IndexSet {
        &self.q
    }

    /// Solves `-A^(m) x = R b`; values are aligned with the pattern.
    pub fn solve(&self, b: SparseRhs<'_>) -> Vec<f64> {
        match &self.chol {
            None => Vec::new(),
            Some(c) => c.solve(&b.restrict(&self.q)).iter().copied().collect(),
        }
    }
}

/// Prolonged residual `r = b + A R^T x`, sparse and keyed by index.
pub fn prolonged_residual(a: &CsrMatrix, b: SparseRhs<'_>, q: &IndexSet, x: &[f64]) -> BTreeMap<usize, f64> {
    let mut r: BTreeMap<usize, f64> = b.indices.iter().copied().zip(b.values.iter().copied()).collect();
    // A is symmetric, so column k is row k
    for (k, &xk) in q.iter().zip(x) {
        for (j, v) in a.row_iter(k) {
            *r.entry(j).or_insert(0.0) += v * xk;
        }
    }
    r
}

/// Parameters of dynamic pattern growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicConfig {
    /// Entries added per sweep.
    pub n_add: usize,
    /// Total entries added per row.
    pub n_ent: usize,
    /// Sweep limit.
    pub it_max: usize,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self { n_add: 2, n_ent: 6, it_max: 50 }
    }
}

impl DynamicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_add == 0 || self.it_max == 0 {
            return Err(Error::invalid(format!("dynamic growth needs n_add >= 1 and it_max >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Result of growing one pattern.
pub struct Growth {
    pub solver: RestrictedSolver,
    pub x: Vec<f64>,
    pub sweeps: usize,
    pub added: usize,
    /// `||r||_2` before the first and after every sweep.
    pub residual_norms: Vec<f64>,
}

fn residual_norm(r: &BTreeMap<usize, f64>) -> f64 {
    r.values().map(|v| v * v).sum::<f64>().sqrt()
}

/// Starting from `q0`, repeatedly adds the indices with the largest prolonged
/// residual (ties by smaller index) and re-solves.
pub fn grow_pattern_dynamic(a: &CsrMatrix, b: SparseRhs<'_>, q0: IndexSet, cfg: &DynamicConfig) -> Result<Growth> {
    cfg.validate()?;
    let mut solver = RestrictedSolver::new(a, q0)?;
    let mut x = solver.solve(b);
    let mut r = prolonged_residual(a, b, solver.pattern(), &x);
    let mut norms = vec![residual_norm(&r)];
    let (mut added, mut sweeps) = (0, 0);
    while added < cfg.n_ent && sweeps < cfg.it_max {
        sweeps += 1;
        let want = cfg.n_add.min(cfg.n_ent - added);
        let q = solver.pattern();
        let mut cand: Vec<(usize, f64)> =
            r.iter().filter(|&(&i, &v)| v != 0.0 && !q.contains(i)).map(|(&i, &v)| (i, v.abs())).collect();
        if cand.is_empty() {
            break;
        }
        cand.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut next = q.clone();
        for &(i, _) in cand.iter().take(want) {
            next.insert(i)?;
        }
        added += want.min(cand.len());
        solver = RestrictedSolver::new(a, next)?;
        x = solver.solve(b);
        r = prolonged_residual(a, b, solver.pattern(), &x);
        norms.push(residual_norm(&r));
    }
    Ok(Growth { solver, x, sweeps, added, residual_norms: norms })
}
