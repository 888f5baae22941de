//! Block preconditioner built from an approximate Schur complement of the
//! element pressure block.
//!
//! Each element row `m` gets a small set `Q^(m)` of face unknowns. Local
//! solves with `-A_pipi` restricted to that set give sparse approximations of
//! `A_ppi A_pipi^{-1}` and `A_pipi^{-1} A_pip`, whose product with `A_pipi`
//! approximates the Schur correction `H`. The sets can be taken from the
//! matrix, from fixed geometric prototypes, or grown greedily.

mod pattern;
mod precond;
mod restricted;

pub use pattern::{
    base_pattern, full_pattern, static_pattern_faces, static_patterns, PatternSet, Prototype, Provenance,
};
pub use precond::{
    build_stage1, build_stage2, post_filter, EdfaConfig, EdfaPreconditioner, Filtration, PatternChoice, Stage1,
    Stage1Stats,
};
pub use restricted::{grow_pattern_dynamic, prolonged_residual, DynamicConfig, Growth, RestrictedSolver, SparseRhs};
