use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HexGrid;
use crate::{Error, Result};

/// Outer side of the box grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Side {
    /// Local face slot of the elements touching this side.
    pub fn slot(self) -> usize {
        self as usize
    }
}

/// Constant-pressure well through the full thickness of column `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub i: usize,
    pub j: usize,
    pub pressure: f64,
}

/// Condition attached to one face after resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceCondition {
    /// Unknown face pressure.
    Free,
    /// Prescribed pressure in bar; the face is eliminated.
    Dirichlet(f64),
    /// Prescribed outward normal Darcy flux in m/d on a boundary face.
    Neumann(f64),
}

/// Prescribed pressures, fluxes and wells. Boundary faces not listed are no-flow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundarySpec {
    pub dirichlet_faces: Vec<(usize, f64)>,
    pub neumann_faces: Vec<(usize, f64)>,
    pub well_columns: Vec<Well>,
}

impl BoundarySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dirichlet(mut self, face: usize, pressure: f64) -> Self {
        self.dirichlet_faces.push((face, pressure));
        self
    }

    pub fn with_neumann(mut self, face: usize, flux: f64) -> Self {
        self.neumann_faces.push((face, flux));
        self
    }

    pub fn with_well(mut self, i: usize, j: usize, pressure: f64) -> Self {
        self.well_columns.push(Well { i, j, pressure });
        self
    }

    /// Prescribes `pressure` on every face of one outer side.
    pub fn with_side_pressure(mut self, grid: &HexGrid, side: Side, pressure: f64) -> Self {
        self.dirichlet_faces.extend(side_faces(grid, side).into_iter().map(|f| (f, pressure)));
        self
    }

    /// Prescribes the outward flux `flux` on every face of one outer side.
    pub fn with_side_flux(mut self, grid: &HexGrid, side: Side, flux: f64) -> Self {
        self.neumann_faces.extend(side_faces(grid, side).into_iter().map(|f| (f, flux)));
        self
    }

    /// Producer at the center column and injectors at the four corner columns.
    pub fn five_spot(grid: &HexGrid, producer: f64, injector: f64) -> Self {
        let [nx, ny, _] = grid.dims();
        let mut bc = Self::new().with_well(nx / 2, ny / 2, producer);
        for (i, j) in [(0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)] {
            if (i, j) != (nx / 2, ny / 2) && !bc.well_columns.iter().any(|w| (w.i, w.j) == (i, j)) {
                bc = bc.with_well(i, j, injector);
            }
        }
        bc
    }

    /// Per-face conditions. Fails on overlapping or contradictory entries.
    pub fn resolve(&self, grid: &HexGrid) -> Result<Vec<FaceCondition>> {
        let nf = grid.n_faces();
        let check = |f: usize| {
            if f >= nf {
                Err(Error::IndexOutOfRange { index: f, bound: nf })
            } else {
                Ok(())
            }
        };
        let mut dirichlet: BTreeMap<usize, f64> = BTreeMap::new();
        let mut put = |f: usize, p: f64, what: &str| -> Result<()> {
            if !p.is_finite() {
                return Err(Error::invalid(format!("{what} on face {f}: non-finite pressure")));
            }
            match dirichlet.insert(f, p) {
                Some(old) if old != p => {
                    Err(Error::invalid(format!("face {f}: conflicting prescribed pressures {old} and {p}")))
                }
                _ => Ok(()),
            }
        };
        for &(f, p) in &self.dirichlet_faces {
            check(f)?;
            put(f, p, "dirichlet")?;
        }
        let [nx, ny, nz] = grid.dims();
        for w in &self.well_columns {
            if w.i >= nx || w.j >= ny {
                return Err(Error::invalid(format!("well column ({}, {}) outside {nx}x{ny}", w.i, w.j)));
            }
            for k in 0..nz {
                let e = grid.elem_at(w.i as isize, w.j as isize, k as isize).expect("in range");
                for slot in 0..4 {
                    put(grid.elem_faces(e)[slot], w.pressure, "well")?;
                }
            }
        }
        let mut out = vec![FaceCondition::Free; nf];
        for (&f, &p) in &dirichlet {
            out[f] = FaceCondition::Dirichlet(p);
        }
        for &(f, v) in &self.neumann_faces {
            check(f)?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("neumann face {f}: non-finite flux")));
            }
            if !grid.is_boundary_face(f) {
                return Err(Error::invalid(format!("neumann condition on interior face {f}")));
            }
            match out[f] {
                FaceCondition::Dirichlet(_) => {
                    return Err(Error::invalid(format!("face {f} is both Dirichlet and Neumann")));
                }
                FaceCondition::Neumann(old) if old != v => {
                    return Err(Error::invalid(format!("face {f}: conflicting fluxes {old} and {v}")));
                }
                _ => out[f] = FaceCondition::Neumann(v),
            }
        }
        for f in grid.boundary_faces() {
            if out[f] == FaceCondition::Free {
                out[f] = FaceCondition::Neumann(0.0);
            }
        }
        Ok(out)
    }
}

/// Faces on one outer side, in face-id order.
pub fn side_faces(grid: &HexGrid, side: Side) -> Vec<usize> {
    let slot = side.slot();
    let mut out: Vec<usize> =
        (0..grid.n_elems()).filter(|&e| grid.neighbor(e, slot).is_none()).map(|e| grid.elem_faces(e)[slot]).collect();
    out.sort_unstable();
    out
}
