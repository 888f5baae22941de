use nalgebra::{DMatrix, DVector};

use super::{CsrMatrix, IndexSet};
use crate::{Error, Result};

/// Dense `rows x cols` block of `a`, i.e. `R_r A R_c^T`.
pub fn extract_principal_submatrix(a: &CsrMatrix, rows: &IndexSet, cols: &IndexSet) -> Result<DMatrix<f64>> {
    if let Some(&r) = rows.as_slice().last() {
        if r >= a.nrows() {
            return Err(Error::IndexOutOfRange { index: r, bound: a.nrows() });
        }
    }
    if let Some(&c) = cols.as_slice().last() {
        if c >= a.ncols() {
            return Err(Error::IndexOutOfRange { index: c, bound: a.ncols() });
        }
    }
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    let cset = cols.as_slice();
    for (li, r) in rows.iter().enumerate() {
        let (rc, rv) = a.row(r);
        // merge the sorted row with the sorted column set
        let (mut p, mut q) = (0, 0);
        while p < rc.len() && q < cset.len() {
            match rc[p].cmp(&cset[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    m[(li, q)] = rv[p];
                    p += 1;
                    q += 1;
                }
            }
        }
    }
    Ok(m)
}

/// Solves `M x = b` by Cholesky. Fails when `M` is not numerically SPD.
pub fn dense_spd_solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if !m.is_square() || m.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!("dense solve: {}x{} with rhs {}", m.nrows(), m.ncols(), b.len())));
    }
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization(format!("dense {}x{} block is not SPD", m.nrows(), m.ncols())))?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}
