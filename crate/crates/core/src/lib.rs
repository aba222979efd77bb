//! Geodesic closing, partner orbits and comparison geometry in negative curvature.
//!
//! The constant-curvature plane is modelled exactly in [`hyp2`]; pinched
//! variable curvature is realized on rotationally symmetric surfaces in
//! [`surface`]. The remaining modules hold the bound constants, the
//! triangle checkers, orbit constructions and discrete-group tooling.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod comparison;
pub mod error;
pub mod groups;
pub mod hyp2;
pub mod orbits;
pub mod surface;
pub mod tolerances;

pub use error::{GeomError, Result};
