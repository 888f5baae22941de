use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3};

use crate::grid::{trilinear_jacobian, HexGrid, GAUSS_1D};
use crate::{Error, Result};

/// Elemental velocity mass matrix `B`, its inverse and the inverse row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrix {
    pub b: Matrix6<f64>,
    /// Symmetric to the bit.
    pub binv: Matrix6<f64>,
    /// `L_i = sum_j binv[(i, j)]`.
    pub row_sums: [f64; 6],
}

impl ElementMatrix {
    /// Inverts `b` block by block over the connected components of its exact
    /// nonzero graph, so structural zeros of `b` stay exact zeros in `binv`.
    pub fn from_b(element: usize, b: Matrix6<f64>) -> Result<Self> {
        let not_spd = || Error::Geometry { element, reason: "elemental matrix is not positive definite".into() };
        let mut comp = [0usize, 1, 2, 3, 4, 5];
        fn root(c: &mut [usize; 6], mut i: usize) -> usize {
            while c[i] != i {
                i = c[i];
            }
            i
        }
        for i in 0..6 {
            for j in 0..i {
                if b[(i, j)] != 0.0 || b[(j, i)] != 0.0 {
                    let (ri, rj) = (root(&mut comp, i), root(&mut comp, j));
                    comp[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut inv = Matrix6::zeros();
        for r in 0..6 {
            if root(&mut comp, r) != r {
                continue;
            }
            let members: Vec<usize> = (0..6).filter(|&i| root(&mut comp, i) == r).collect();
            let sub = DMatrix::from_fn(members.len(), members.len(), |i, j| b[(members[i], members[j])]);
            let sub_inv = sub.cholesky().ok_or_else(not_spd)?.inverse();
            for (i, &mi) in members.iter().enumerate() {
                for (j, &mj) in members.iter().enumerate() {
                    inv[(mi, mj)] = sub_inv[(i, j)];
                }
            }
        }
        let binv = (inv + inv.transpose()) * 0.5;
        let mut row_sums = [0.0; 6];
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s = binv.row(i).sum();
        }
        Ok(Self { b, binv, row_sums })
    }

    pub fn binv(&self, i: usize, j: usize) -> f64 {
        self.binv[(i, j)]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }
}

/// Reference RT0 basis in slot order `-x, +x, -y, +y, -z, +z`, unit outward
/// flux through its own face of the unit cube.
fn reference_basis(xi: [f64; 3]) -> [Vector3<f64>; 6] {
    [
        Vector3::new(xi[0] - 1.0, 0.0, 0.0),
        Vector3::new(xi[0], 0.0, 0.0),
        Vector3::new(0.0, xi[1] - 1.0, 0.0),
        Vector3::new(0.0, xi[1], 0.0),
        Vector3::new(0.0, 0.0, xi[2] - 1.0),
        Vector3::new(0.0, 0.0, xi[2]),
    ]
}

/// `B_ij = gamma * int eta_i^T K^{-1} eta_j` via the contravariant Piola map
/// and 2x2x2 Gauss quadrature.
pub fn elemental_b(nodes: &[[f64; 3]; 8], k: &Matrix3<f64>, gamma: f64, element: usize) -> Result<Matrix6<f64>> {
    let kinv =
        k.try_inverse().ok_or_else(|| Error::Geometry { element, reason: "singular conductivity tensor".into() })?;
    let mut b = Matrix6::zeros();
    for (x, wx) in GAUSS_1D {
        for (y, wy) in GAUSS_1D {
            for (z, wz) in GAUSS_1D {
                let xi = [x, y, z];
                let j = trilinear_jacobian(nodes, xi);
                let det = j.determinant();
                if !(det > 0.0) {
                    return Err(Error::Geometry { element, reason: format!("non-positive Jacobian {det:e}") });
                }
                let m = j.transpose() * kinv * j * (wx * wy * wz / det);
                let eta = reference_basis(xi);
                for r in 0..6 {
                    let me = m * eta[r];
                    for c in r..6 {
                        b[(r, c)] += me.dot(&eta[c]);
                    }
                }
            }
        }
    }
    for r in 0..6 {
        for c in 0..r {
            b[(r, c)] = b[(c, r)];
        }
    }
    Ok(b * gamma)
}

/// Elemental matrices of one element of `grid`.
pub fn element_matrix(grid: &HexGrid, e: usize, k: &Matrix3<f64>, gamma: f64) -> Result<ElementMatrix> {
    let b = elemental_b(&grid.elem_nodes(e), k, gamma, e)?;
    ElementMatrix::from_b(e, b)
}
