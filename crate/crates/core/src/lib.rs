//! Pseudospectral solver for normalized solutions of the mixed fractional
//! Schrödinger equation
//!
//! ```text
//! (-Δ)^{s₁}u + (-Δ)^{s₂}u + λu + V(x)u = g(u),   ∫|u|² = a
//! ```
//!
//! on periodic boxes in one and two dimensions.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fiber;
pub mod functionals;
pub mod gn;
pub mod io;
pub mod model;
pub mod problem;
pub mod sampling;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use problem::{ProblemSpec, SolverParams};
pub use spectral::{make_grid, Field, Grid, MultiplierSpec};
