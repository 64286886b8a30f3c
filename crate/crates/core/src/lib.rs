//! Steady incompressible flow of activated Euler fluids on triangulations.
//!
//! Three-field discretization: cellwise-constant deviatoric stress,
//! lowest-order Brezzi-Douglas-Marini velocity and cellwise-constant
//! pressure, coupled through local discontinuous Galerkin fluxes. The
//! nonlinear system is solved by Newton's method with an augmented
//! Lagrangian block preconditioner.

#![allow(clippy::needless_range_loop, clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod constitutive;
pub mod driver;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod postprocess;
pub mod solver;
pub mod sparse;
pub mod tensor;
pub mod verification;

pub use error::{Error, Result};
