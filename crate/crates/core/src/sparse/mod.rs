//! Sparse matrix kernels and small dense solves shared by assembly, the
//! preconditioner and the Krylov solver.

mod csr;
mod dense;
mod ilu;
mod index_set;
pub mod mm;

pub use csr::CsrMatrix;
pub use dense::{dense_spd_solve, extract_principal_submatrix};
pub use ilu::{ic_factorize, ilu_factorize, FactorKind, FactorLog, Fill, InnerFactorization};
pub use index_set::IndexSet;

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
