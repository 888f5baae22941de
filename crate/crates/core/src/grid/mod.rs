//! Hexahedral grids, conductivity fields, rock properties and boundary conditions.

mod bc;
mod field;
mod hex;
mod props;
mod vtk;

pub use bc::{side_faces, BoundarySpec, FaceCondition, Side, Well};
pub use field::{
    load_raster_field, rotate_tensor, rotate_tensor_field, rotation_matrix, surface_angles, synth_heterogeneous_field,
    ConductivityField, SynthMode,
};
pub use hex::{opposite_slot, slot_axis, slot_is_upper, Axis, HexGrid, NUM_LOCAL_FACES};
pub(crate) use hex::{trilinear_jacobian, GAUSS_1D};
pub use props::FluidRockProps;
pub use vtk::write_vtk;
