use super::ElementMatrix;
use crate::{Error, Result};

/// One element's view of a face: its matrices, its face ids and the local slot.
#[derive(Debug, Clone, Copy)]
pub struct FluxSide<'a> {
    pub elem: usize,
    pub matrix: &'a ElementMatrix,
    pub faces: &'a [usize; 6],
    pub slot: usize,
}

/// A face flux as a linear functional of element and face pressures:
/// `q = sum elem.c * p[elem.e] + sum faces.c * pi[faces.f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFlux {
    pub elem: Vec<(usize, f64)>,
    pub faces: Vec<(usize, f64)>,
}

impl LinearFlux {
    pub fn eval(&self, p: &[f64], pi: &[f64]) -> f64 {
        self.elem.iter().map(|&(e, c)| c * p[e]).sum::<f64>() + self.faces.iter().map(|&(f, c)| c * pi[f]).sum::<f64>()
    }

    /// Sum of the absolute values of the terms in [`eval`](Self::eval).
    pub fn magnitude(&self, p: &[f64], pi: &[f64]) -> f64 {
        self.elem.iter().map(|&(e, c)| (c * p[e]).abs()).sum::<f64>()
            + self.faces.iter().map(|&(f, c)| (c * pi[f]).abs()).sum::<f64>()
    }
}

/// Outward flux of `side.elem` through its face `side.slot` from the local
/// MHFE relation `q_i = L_i p - sum_j Binv_ij pi_j`.
pub fn local_flux_coefficients(side: FluxSide<'_>) -> LinearFlux {
    let i = side.slot;
    LinearFlux {
        elem: vec![(side.elem, side.matrix.row_sum(i))],
        faces: (0..6).map(|j| (side.faces[j], -side.matrix.binv(i, j))).collect(),
    }
}

/// Strongly continuous flux from `a.elem` into `b.elem` across their shared
/// face: `q = (b' Lambda_a - b Lambda_b) / (b + b')` with `b = Binv_a[ii]`,
/// `b' = Binv_b[ii]` and `Lambda = L_i p - sum_{j != i} Binv_ij pi_j`.
pub fn interelement_flux_coefficients(a: FluxSide<'_>, b: FluxSide<'_>) -> Result<LinearFlux> {
    let (ia, ib) = (a.slot, b.slot);
    if a.faces[ia] != b.faces[ib] {
        return Err(Error::Assembly(format!("elements {} and {} do not share face {}", a.elem, b.elem, a.faces[ia])));
    }
    let ba = a.matrix.binv(ia, ia);
    let bb = b.matrix.binv(ib, ib);
    let den = ba + bb;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Assembly(format!("face {}: flux denominator {den:e}", a.faces[ia])));
    }
    let wa = bb / den;
    let wb = ba / den;
    let mut faces = Vec::with_capacity(10);
    for j in (0..6).filter(|&j| j != ia) {
        faces.push((a.faces[j], -wa * a.matrix.binv(ia, j)));
    }
    for j in (0..6).filter(|&j| j != ib) {
        faces.push((b.faces[j], wb * b.matrix.binv(ib, j)));
    }
    Ok(LinearFlux { elem: vec![(a.elem, wa * a.matrix.row_sum(ia)), (b.elem, -wb * b.matrix.row_sum(ib))], faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::element_matrix;
    use crate::grid::HexGrid;
    use nalgebra::Matrix3;

    fn pair(k1: f64, k2: f64) -> (HexGrid, ElementMatrix, ElementMatrix) {
        let g = HexGrid::build_structured(2, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let a = element_matrix(&g, 0, &(Matrix3::identity() * k1), 1.0).unwrap();
        let b = element_matrix(&g, 1, &(Matrix3::identity() * k2), 1.0).unwrap();
        (g, a, b)
    }

    fn sides<'a>(g: &'a HexGrid, a: &'a ElementMatrix, b: &'a ElementMatrix) -> (FluxSide<'a>, FluxSide<'a>) {
        (
            FluxSide { elem: 0, matrix: a, faces: g.elem_faces(0), slot: 1 },
            FluxSide { elem: 1, matrix: b, faces: g.elem_faces(1), slot: 0 },
        )
    }

    #[test]
    fn uniform_state_has_no_flux() {
        let (g, a, b) = pair(1.0, 3.0);
        let (sa, sb) = sides(&g, &a, &b);
        let q = interelement_flux_coefficients(sa, sb).unwrap();
        assert!(q.eval(&[5.0, 5.0], &[5.0; 11]).abs() < 1e-13);
    }

    #[test]
    fn antisymmetric_under_swap() {
        let (g, a, b) = pair(1.0, 1.0);
        let (sa, sb) = sides(&g, &a, &b);
        let p = [2.0, 0.0];
        let pi = [0.3, 1.0, 0.7, 0.1, 0.2, 0.4, 0.9, 0.8, 0.5, 0.6, 0.55];
        let qab = interelement_flux_coefficients(sa, sb).unwrap().eval(&p, &pi);
        let qba = interelement_flux_coefficients(sb, sa).unwrap().eval(&p, &pi);
        assert!((qab + qba).abs() < 1e-13);
        assert!(qab > 0.0);
    }

    #[test]
    fn matches_harmonic_transmissibility_in_a_column() {
        // piecewise linear 1-D solution; a unit-cube half cell has transmissibility 2k
        let (k1, k2) = (1.0, 4.0);
        let (g, a, b) = pair(k1, k2);
        let (sa, sb) = sides(&g, &a, &b);
        let (p0, p1) = (3.0, 1.0);
        let t = |k: f64| 2.0 * k;
        let qh = (p0 - p1) / (1.0 / t(k1) + 1.0 / t(k2));
        let pi_mid = p0 - qh / t(k1);
        let mut pi = [0.0; 11];
        let fa = g.elem_faces(0);
        let fb = g.elem_faces(1);
        pi[fa[0]] = p0 + qh / t(k1);
        pi[fa[1]] = pi_mid;
        pi[fb[1]] = p1 - qh / t(k2);
        for s in 2..6 {
            pi[fa[s]] = p0;
            pi[fb[s]] = p1;
        }
        let q = interelement_flux_coefficients(sa, sb).unwrap().eval(&[p0, p1], &pi);
        assert!((q - qh).abs() < 1e-12, "{q} vs {qh}");
        // and the local flux agrees with it
        let ql = local_flux_coefficients(sa).eval(&[p0, p1], &pi);
        assert!((ql - qh).abs() < 1e-12);
    }

    #[test]
    fn mismatched_faces_are_rejected() {
        let (g, a, b) = pair(1.0, 1.0);
        let sa = FluxSide { elem: 0, matrix: &a, faces: g.elem_faces(0), slot: 0 };
        let sb = FluxSide { elem: 1, matrix: &b, faces: g.elem_faces(1), slot: 0 };
        assert!(interelement_flux_coefficients(sa, sb).is_err());
    }
}
