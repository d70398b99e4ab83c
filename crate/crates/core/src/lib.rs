//! Numerical laboratory for nodal statistics of Laplace eigenfunctions on the
//! flat torus at scales slightly above the wavelength.
//!
//! The crate is organised bottom-up: exact lattice arithmetic, trigonometric
//! sums and special functions, Gaussian fields, grid-based nodal counting, and
//! the Monte Carlo experiments built on top of them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod bessel;
pub mod boundary;
pub mod derand;
pub mod eigenfunction;
pub mod error;
pub mod field;
pub mod measure;
pub mod nodal;
pub mod ns_constant;
pub mod rng;
pub mod trig;

pub use error::{Error, Result};
