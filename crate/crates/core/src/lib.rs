// `!(x > 0.0)` is used on purpose: NaN must fail those tests.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary_geometry;
pub mod error;
pub mod io;
pub mod magnetic_eigensolver_2d;
pub mod mesh;
pub mod robin_oscillator;
pub mod semiclassical_harness;
pub mod theta_profile;
pub mod tridiag;

pub use error::{Error, Result};
