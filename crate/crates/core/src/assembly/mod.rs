//! Lowest-order Raviart-Thomas elemental matrices and the assembled
//! face/element pressure system.

mod element;
mod flux;
mod system;

pub use element::{element_matrix, elemental_b, ElementMatrix};
pub use flux::{interelement_flux_coefficients, local_flux_coefficients, FluxSide, LinearFlux};
pub use system::{assemble, fv_face_flux, BalanceResidual, BlockSystem, FaceDofMap, FaceFlux, TimeStep};
