use serde::{Deserialize, Serialize};

use crate::assembly::BlockSystem;
use crate::grid::HexGrid;
use crate::sparse::{CsrMatrix, IndexSet};
use crate::{Error, Result};

/// Static patch prototypes. `A`, `B` and `D` extend along the axes through
/// the cell, `C` takes every face of the cell and its face neighbors, `E`
/// is `C` together with `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prototype {
    A,
    B,
    C,
    D,
    E,
}

impl Prototype {
    pub const ALL: [Prototype; 5] = [Prototype::A, Prototype::B, Prototype::C, Prototype::D, Prototype::E];

    /// Axial reach in cells, zero for the neighbor-only prototype `C`.
    fn axial_reach(self) -> usize {
        match self {
            Prototype::A | Prototype::E => 2,
            Prototype::B => 3,
            Prototype::D => 4,
            Prototype::C => 0,
        }
    }

    fn all_neighbor_faces(self) -> bool {
        matches!(self, Prototype::C | Prototype::E)
    }
}

impl std::str::FromStr for Prototype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Prototype::A),
            "B" => Ok(Prototype::B),
            "C" => Ok(Prototype::C),
            "D" => Ok(Prototype::D),
            "E" => Ok(Prototype::E),
            other => Err(Error::invalid(format!("unknown prototype {other:?}, expected A-E"))),
        }
    }
}

/// Where a pattern set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Base,
    Static(Prototype),
    Dynamic,
    Full,
    Custom,
}

/// One face-unknown index set `Q^(m)` per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    sets: Vec<IndexSet>,
    provenance: Provenance,
}

impl PatternSet {
    pub fn new(sets: Vec<IndexSet>, provenance: Provenance) -> Self {
        Self { sets, provenance }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, m: usize) -> &IndexSet {
        &self.sets[m]
    }

    pub fn sets(&self) -> &[IndexSet] {
        &self.sets
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn total_size(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    /// Writes one line per element: `m: i j k ...`.
    pub fn write(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (m, s) in self.sets.iter().enumerate() {
            write!(w, "{m}:")?;
            for i in s.iter() {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Q^(m)` = nonzero columns of row `m` of `A_ppi`.
pub fn base_pattern(a_ppi: &CsrMatrix) -> PatternSet {
    let sets = (0..a_ppi.nrows())
        .map(|m| IndexSet::new(a_ppi.row(m).0.to_vec(), a_ppi.ncols()).expect("CSR columns are sorted and in range"))
        .collect();
    PatternSet::new(sets, Provenance::Base)
}

/// Every face unknown for every element.
pub fn full_pattern(n_face_dofs: usize, n_elems: usize) -> PatternSet {
    PatternSet::new(vec![IndexSet::full(n_face_dofs); n_elems], Provenance::Full)
}

/// Face ids (grid numbering) of the patch prototype around element `m`.
/// Cells outside the grid are skipped.
pub fn static_pattern_faces(grid: &HexGrid, proto: Prototype, m: usize) -> Vec<usize> {
    let mut faces: Vec<usize> = grid.elem_faces(m).to_vec();
    if proto.all_neighbor_faces() {
        for n in grid.neighbors(m) {
            faces.extend_from_slice(grid.elem_faces(n));
        }
    }
    let [i, j, k] = grid.elem_ijk(m).map(|v| v as isize);
    for slot in 0..6 {
        let step = if slot % 2 == 1 { 1 } else { -1 };
        let axis = slot / 2;
        for reach in 1..=proto.axial_reach() as isize {
            let mut pos = [i, j, k];
            pos[axis] += step * reach;
            match grid.elem_at(pos[0], pos[1], pos[2]) {
                // far face of the cell `reach` steps away
                Some(e) => faces.push(grid.elem_faces(e)[slot]),
                None => break,
            }
        }
    }
    faces.sort_unstable();
    faces.dedup();
    faces
}

/// Prototype patterns mapped to face unknowns; Dirichlet faces are dropped.
pub fn static_patterns(system: &BlockSystem, proto: Prototype) -> PatternSet {
    let grid = system.grid();
    let dofs = system.dofs();
    let sets = (0..grid.n_elems())
        .map(|m| {
            let idx = static_pattern_faces(grid, proto, m).into_iter().filter_map(|f| dofs.dof(f)).collect();
            IndexSet::new(idx, dofs.n_dofs()).expect("dofs are in range")
        })
        .collect();
    PatternSet::new(sets, Provenance::Static(proto))
}
