//! Spectral Galerkin solver for the isothermal primitive equations in a
//! laterally periodic channel, with time-periodic and steady-state solvers.

// `!(a > b)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraint;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod krylov;
pub mod periodic;
pub mod quadrature;
pub mod selftest;
pub mod transform;

pub use error::{HpeError, Result};
pub use field::{BarotropicField, SpectralField};
pub use grid::{make_grid, Grid};
