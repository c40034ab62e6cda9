//! Rough-path discretisation of closed vortex filaments.

pub mod circle_algebra;
pub mod corpus;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod rough_integral;
pub mod rough_path;

pub use error::{Error, Result};
