use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::HexGrid;
use crate::{Error, Result};

/// Per-element hydraulic conductivity tensors in m/d.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    tensors: Vec<Matrix3<f64>>,
    /// `(theta_x, theta_y)` per element, set by [`rotate_tensor_field`].
    angles: Option<Vec<[f64; 2]>>,
}

impl ConductivityField {
    /// Validates symmetry and positive definiteness of every tensor.
    pub fn new(tensors: Vec<Matrix3<f64>>) -> Result<Self> {
        for (e, k) in tensors.iter().enumerate() {
            check_spd(e, k)?;
        }
        Ok(Self { tensors, angles: None })
    }

    pub fn homogeneous(n_elems: usize, k: f64) -> Result<Self> {
        Self::from_diagonals(vec![[k; 3]; n_elems])
    }

    pub fn from_diagonals(diags: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(diags.into_iter().map(|d| Matrix3::from_diagonal(&Vector3::from(d))).collect())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, e: usize) -> &Matrix3<f64> {
        &self.tensors[e]
    }

    pub fn tensors(&self) -> &[Matrix3<f64>] {
        &self.tensors
    }

    pub fn angles(&self) -> Option<&[[f64; 2]]> {
        self.angles.as_deref()
    }

    /// Applies explicit per-element rotation angles `(theta_x, theta_y)`.
    pub fn rotated(&self, angles: &[[f64; 2]]) -> Result<Self> {
        if angles.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} angle pairs for {} tensors",
                angles.len(),
                self.tensors.len()
            )));
        }
        let mut tensors = Vec::with_capacity(self.tensors.len());
        for (e, (k, &[tx, ty])) in self.tensors.iter().zip(angles).enumerate() {
            if !tx.is_finite() || !ty.is_finite() {
                return Err(Error::invalid(format!("element {e}: non-finite rotation angles")));
            }
            tensors.push(rotate_tensor(k, tx, ty));
        }
        Ok(Self { tensors, angles: Some(angles.to_vec()) })
    }

    fn check_len(&self, grid: &HexGrid) -> Result<()> {
        if self.tensors.len() != grid.n_elems() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} tensors, grid has {} elements",
                self.tensors.len(),
                grid.n_elems()
            )));
        }
        Ok(())
    }
}

fn check_spd(e: usize, k: &Matrix3<f64>) -> Result<()> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("element {e}: non-finite conductivity")));
    }
    if *k != k.transpose() {
        return Err(Error::invalid(format!("element {e}: conductivity tensor is not symmetric")));
    }
    if k.cholesky().is_none() {
        return Err(Error::invalid(format!("element {e}: conductivity tensor is not positive definite")));
    }
    Ok(())
}

/// Rotation `R_y(-theta_y) R_x(-theta_x)`.
pub fn rotation_matrix(theta_x: f64, theta_y: f64) -> Matrix3<f64> {
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), -theta_y);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), -theta_x);
    (ry * rx).into_inner()
}

/// `R K R^T`, symmetrized bitwise.
pub fn rotate_tensor(k: &Matrix3<f64>, theta_x: f64, theta_y: f64) -> Matrix3<f64> {
    if theta_x == 0.0 && theta_y == 0.0 {
        return *k;
    }
    let r = rotation_matrix(theta_x, theta_y);
    let out = r * k * r.transpose();
    0.5 * (out + out.transpose())
}

/// Angles that rotate `e_z` onto the mean unit normal of each element's top face.
pub fn surface_angles(grid: &HexGrid) -> Vec<[f64; 2]> {
    (0..grid.n_elems())
        .map(|e| {
            let q = grid.face_nodes(grid.elem_faces(e)[5]);
            let p = |n: usize| Vector3::from(q[n]);
            // vector area of a bilinear patch
            let n = 0.5 * (p(3) - p(0)).cross(&(p(2) - p(1)));
            let n = n.normalize();
            let theta_x = n.y.asin();
            let theta_y = -n.x.atan2(n.z);
            [theta_x, theta_y]
        })
        .collect()
}

/// Rotates every tensor to follow the top surface of the (deformed) grid.
pub fn rotate_tensor_field(field: &ConductivityField, grid: &HexGrid) -> Result<ConductivityField> {
    field.check_len(grid)?;
    field.rotated(&surface_angles(grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    /// Independent log-uniform value per cell.
    #[default]
    LogUniform,
    /// Per-layer log-mean with log-normal scatter, clamped to the range.
    LayeredLogNormal,
}

/// Synthetic heterogeneous field with diagonal tensors in `[kmin, kmax]`.
///
/// `kz_ratio` scales the vertical component; the result is clamped to the range.
pub fn synth_heterogeneous_field(
    grid: &HexGrid,
    seed: u64,
    range: (f64, f64),
    mode: SynthMode,
    kz_ratio: f64,
) -> Result<ConductivityField> {
    let (kmin, kmax) = range;
    if !(kmin > 0.0) || !kmax.is_finite() || kmin > kmax {
        return Err(Error::invalid(format!("invalid conductivity range [{kmin}, {kmax}]")));
    }
    if !(kz_ratio > 0.0) || !kz_ratio.is_finite() {
        return Err(Error::invalid(format!("kz_ratio must be positive, got {kz_ratio}")));
    }
    let (lo, hi) = (kmin.log10(), kmax.log10());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_elems();
    let logs: Vec<f64> = if lo == hi {
        vec![lo; n]
    } else {
        match mode {
            SynthMode::LogUniform => (0..n).map(|_| rng.random_range(lo..=hi)).collect(),
            SynthMode::LayeredLogNormal => {
                let [nx, ny, nz] = grid.dims();
                let sigma = (hi - lo) / 6.0;
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
                let mut out = Vec::with_capacity(n);
                for _ in 0..nz {
                    let mean = rng.random_range(lo..=hi);
                    for _ in 0..nx * ny {
                        out.push((mean + normal.sample(&mut rng)).clamp(lo, hi));
                    }
                }
                out
            }
        }
    };
    let diags = logs
        .into_iter()
        .map(|l| {
            let k = 10f64.powf(l).clamp(kmin, kmax);
            [k, k, (k * kz_ratio).clamp(kmin, kmax)]
        })
        .collect();
    ConductivityField::from_diagonals(diags)
}

/// Reads `3 * N_e` whitespace-separated positive values: all `kx`, then all
/// `ky`, then all `kz`, each block x-fastest. Extra trailing values are ignored.
pub fn load_raster_field(path: impl AsRef<Path>, grid: &HexGrid) -> Result<ConductivityField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let n = grid.n_elems();
    let mut diags = vec![[0.0; 3]; n];
    let mut tokens = text.split_whitespace();
    for comp in 0..3 {
        for (cell, d) in diags.iter_mut().enumerate() {
            let tok = tokens.next().ok_or_else(|| {
                Error::parse(path, format!("file ends at cell {cell} of component {comp}; need {} values", 3 * n))
            })?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, format!("cell {cell}, component {comp}: invalid value {tok:?}")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::parse(path, format!("cell {cell}, component {comp}: non-positive value {v}")));
            }
            d[comp] = v;
        }
    }
    ConductivityField::from_diagonals(diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_eigs(k: &Matrix3<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn zero_angles_are_exact_identity() {
        let k = Matrix3::new(3.0, 0.5, 0.1, 0.5, 2.0, 0.2, 0.1, 0.2, 1.0);
        assert_eq!(rotate_tensor(&k, 0.0, 0.0), k);
    }

    #[test]
    fn isotropic_is_rotation_invariant() {
        let k = Matrix3::identity() * 4.0;
        let r = rotate_tensor(&k, 0.3, -1.1);
        assert!((r - k).amax() < 1e-14);
    }

    #[test]
    fn quarter_turn_about_y_swaps_x_and_z() {
        let k = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0));
        let r = rotate_tensor(&k, 0.0, std::f64::consts::FRAC_PI_2);
        let expected = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 2.0));
        assert!((r - expected).amax() < 1e-15);
    }

    proptest! {
        #[test]
        fn rotation_preserves_eigenvalues(
            a in 0.1f64..10.0, b in 0.1f64..10.0, c in 0.1f64..10.0,
            tx in -1.5f64..1.5, ty in -1.5f64..1.5,
        ) {
            let k = Matrix3::from_diagonal(&Vector3::new(a, b, c));
            let r = rotate_tensor(&k, tx, ty);
            prop_assert_eq!(r, r.transpose());
            for (x, y) in sorted_eigs(&k).iter().zip(sorted_eigs(&r)) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn flat_grid_leaves_field_unchanged() {
        let g = HexGrid::build_structured(3, 3, 2, 1.0, 1.0, 1.0).unwrap();
        let f = synth_heterogeneous_field(&g, 4, (0.1, 10.0), SynthMode::LogUniform, 0.5).unwrap();
        let r = rotate_tensor_field(&f, &g).unwrap();
        assert_eq!(r.tensors(), f.tensors());
    }

    #[test]
    fn rotated_frame_follows_dome_surface() {
        let g = HexGrid::build_structured(6, 6, 2, 1.0, 1.0, 0.5).unwrap();
        let d = g.deform_dome(1.5, g.default_dome_radius()).unwrap();
        let angles = surface_angles(&d);
        let mut tilted = 0;
        for (e, &[tx, ty]) in angles.iter().enumerate() {
            let q = d.face_nodes(d.elem_faces(e)[5]);
            let p = |n: usize| Vector3::from(q[n]);
            let normal = (p(3) - p(0)).cross(&(p(2) - p(1))).normalize();
            let r = rotation_matrix(tx, ty);
            assert!((r * Vector3::z() - normal).norm() < 1e-12);
            assert!((r * Vector3::x()).dot(&normal).abs() < 1e-12);
            assert!((r * Vector3::y()).dot(&normal).abs() < 1e-12);
            if tx.abs() > 1e-3 || ty.abs() > 1e-3 {
                tilted += 1;
            }
        }
        assert!(tilted > 0);
    }

    #[test]
    fn rejects_non_spd() {
        let k = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(ConductivityField::new(vec![k]).is_err());
        let mut s = Matrix3::identity();
        s[(0, 1)] = 0.1;
        assert!(ConductivityField::new(vec![s]).is_err());
    }

    #[test]
    fn degenerate_range_is_homogeneous() {
        let g = HexGrid::build_structured(4, 3, 2, 1.0, 1.0, 1.0).unwrap();
        for mode in [SynthMode::LogUniform, SynthMode::LayeredLogNormal] {
            let f = synth_heterogeneous_field(&g, 9, (0.25, 0.25), mode, 1.0).unwrap();
            assert!(f.tensors().iter().all(|k| *k == Matrix3::identity() * 0.25));
        }
    }

    #[test]
    fn same_seed_same_field() {
        let g = HexGrid::build_structured(5, 5, 3, 1.0, 1.0, 1.0).unwrap();
        for mode in [SynthMode::LogUniform, SynthMode::LayeredLogNormal] {
            let a = synth_heterogeneous_field(&g, 17, (1e-3, 1e2), mode, 0.1).unwrap();
            let b = synth_heterogeneous_field(&g, 17, (1e-3, 1e2), mode, 0.1).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn values_span_the_range() {
        let g = HexGrid::build_structured(20, 20, 4, 1.0, 1.0, 1.0).unwrap();
        let (kmin, kmax) = (1e-7, 2.0);
        let f = synth_heterogeneous_field(&g, 1, (kmin, kmax), SynthMode::LogUniform, 1.0).unwrap();
        let mut decades = [0usize; 8];
        for k in f.tensors() {
            let v = k[(0, 0)];
            assert!((kmin..=kmax).contains(&v));
            decades[((v.log10() + 7.0).floor() as usize).min(7)] += 1;
        }
        assert!(decades[0] > 0, "lowest decade empty");
        assert!(decades[7] > 0, "highest decade empty");
        assert!(decades.iter().all(|&c| c > 0));
    }

    #[test]
    fn raster_round_trip_and_errors() {
        let g = HexGrid::build_structured(2, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.dat");
        std::fs::write(&p, "1 2\n3 4\n5 6\n").unwrap();
        let f = load_raster_field(&p, &g).unwrap();
        assert_eq!(f.tensor(0).diagonal(), Vector3::new(1.0, 3.0, 5.0));
        assert_eq!(f.tensor(1).diagonal(), Vector3::new(2.0, 4.0, 6.0));

        std::fs::write(&p, "1 2 3 4 5").unwrap();
        assert!(matches!(load_raster_field(&p, &g), Err(Error::Parse { .. })));
        std::fs::write(&p, "1 2 3 0 5 6").unwrap();
        let err = load_raster_field(&p, &g).unwrap_err().to_string();
        assert!(err.contains("cell 1"), "{err}");
    }
}
