//! marginlab: a numerical laboratory for max-margin interpolation.
//!
//! The crate samples synthetic classification data with controlled label
//! noise, solves the hard-margin linear problem exactly at desk scale, trains
//! two-layer leaky-ReLU networks as a gradient-flow discretization, certifies
//! the KKT structure of the results (multiplier bounds, uniformity ratios,
//! linear decision boundaries), and measures train/test error against
//! closed-form bounds.

pub mod bounds;
pub mod data_gen;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod harness;
pub mod leaky;
pub mod linalg;
pub mod maxmargin;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
