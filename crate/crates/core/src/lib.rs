//! Adaptive isogeometric Poisson solver on trimmed hierarchical B-spline
//! geometries.

mod error;
pub mod adapt;
pub mod assembly;
pub mod bench;
pub mod estimator;
pub mod geometry;
pub mod rect;
pub mod hierarchy;
pub mod splines;
pub mod verify;

pub use error::{Error, Result};
