//! Numerical laboratory for the inverse boundary value problem of the
//! perturbed biharmonic operator.
//!
//! The library builds, on desk-scale tensor grids:
//!
//! * forward solves of the fourth-order problem with Navier boundary data
//!   and the resulting boundary measurement maps,
//! * complex-exponential solution families with controlled remainders,
//! * weighted lower-bound diagnostics for the conjugated operator,
//! * Fourier-mode extraction from boundary measurement differences, for full
//!   and direction-restricted data,
//! * the logarithmic and double-logarithmic parameter schedules and their
//!   stability sweeps, and
//! * the supporting norm, quadrature, and reporting machinery.

pub mod dtn;
pub mod error;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod hash;
pub mod sobolev;
pub mod solver;

pub use error::{Error, Result};
