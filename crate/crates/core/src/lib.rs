//! Numerical q-positivity laboratory.
//!
//! Flat complex tori carry constant (1,1)-classes, grid potentials and
//! Hermitian form fields; on top of those sit a complex Monge–Ampère solver,
//! eigenvalue-count certificates, exact cone decisions on surface Picard
//! lattices, degeneracy loci of polynomial maps and max-gluing of singular
//! potentials.

pub mod calculus;
pub mod degeneracy;
pub mod error;
pub mod field_io;
pub mod geometry;
pub mod gluing;
pub mod linalg;
pub mod ma_solver;
pub mod positivity;
mod spectral;
pub mod surface_cones;

pub use error::{Error, Result};
