//! Level-set topology optimization on structured 2D grids with
//! density-informed hole nucleation.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, configuration text or the command line lives in the `lsto`
//! companion crate.
//!
//! Pipeline of one design evaluation:
//!
//! 1. design variables are smoothed by a linear cone filter ([`field`]),
//! 2. the filtered coefficients become a level-set field and a density field,
//!    either through one shared variable set (single-field coupling) or two
//!    independent sets tied by a penalty (two-field coupling) ([`couple`]),
//! 3. densities are shifted and interpolated with SIMP; the level set selects
//!    material through a smoothed Heaviside ([`couple`], [`solve`]),
//! 4. a plane-stress FE model is solved ([`solve`]),
//! 5. objective components, constraints and adjoint gradients are assembled and
//!    handed to an MMA update ([`opt`]).
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod couple;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub(crate) mod math;
pub mod opt;
pub mod regularize;
pub mod solve;

pub use error::{Error, Result};
pub use grid::Grid;
