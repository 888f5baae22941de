//! Mixed-hybrid finite element / finite volume Darcy flow on hexahedral grids,
//! solved with Bi-CGStab and an explicit decoupling factor approximation
//! (EDFA) block preconditioner.
//!
//! The crate is split along the pipeline:
//!
//! * [`grid`]: structured and dome-deformed hexahedral grids, conductivity
//!   fields, fluid/rock properties and boundary conditions.
//! * [`assembly`]: lowest-order Raviart-Thomas elemental matrices and the
//!   four sparse blocks of the face/element pressure system.
//! * [`sparse`]: CSR kernels, dense restricted solves, incomplete factorizations
//!   and Matrix Market I/O.
//! * [`edfa`]: pattern selection (base, static prototypes, dynamic growth),
//!   the two-stage preconditioner build and its application.
//! * [`krylov`]: right-preconditioned Bi-CGStab.
//! * [`driver`]: steady/transient runs, timestep control, CFL metrics, sweeps.

pub mod assembly;
pub mod driver;
pub mod edfa;
pub mod error;
pub mod grid;
pub mod krylov;
pub mod sparse;

pub use error::{Error, Result};
