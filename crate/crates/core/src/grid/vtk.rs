use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::HexGrid;
use crate::{Error, Result};

const VTK_HEXAHEDRON: u8 = 12;
const VTK_ORDER: [usize; 8] = [0, 1, 3, 2, 4, 5, 7, 6];

/// Writes the grid as a legacy ASCII unstructured grid with per-cell scalars.
pub fn write_vtk(grid: &HexGrid, cell_data: &[(&str, &[f64])], path: impl AsRef<Path>) -> Result<()> {
    for (name, values) in cell_data {
        if values.len() != grid.n_elems() {
            return Err(Error::DimensionMismatch(format!(
                "cell field {name} has {} values for {} cells",
                values.len(),
                grid.n_elems()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid VTK field name {name:?}")));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "edfa grid")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", grid.n_nodes())?;
    for p in grid.node_coords() {
        writeln!(w, "{:.12e} {:.12e} {:.12e}", p[0], p[1], p[2])?;
    }
    let ne = grid.n_elems();
    writeln!(w, "CELLS {} {}", ne, 9 * ne)?;
    for e in 0..ne {
        let [i, j, k] = grid.elem_ijk(e);
        write!(w, "8")?;
        for &n in &VTK_ORDER {
            write!(w, " {}", grid.node_index(i + (n & 1), j + ((n >> 1) & 1), k + ((n >> 2) & 1)))?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_HEXAHEDRON}")?;
    }
    if !cell_data.is_empty() {
        writeln!(w, "CELL_DATA {ne}")?;
        for (name, values) in cell_data {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:.12e}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
