//! Algebraic multigrid toolkit: sparse kernels, model problems, smoothers,
//! strength measures, coarsening, interpolation, hierarchies, two-level
//! analysis and adaptive setup.

pub mod adaptive;
pub mod analysis;
pub mod coarsening;
pub mod config;
pub mod dense;
pub mod error;
pub mod hierarchy;
pub mod interpolation;
pub mod problems;
pub mod smoothers;
pub mod sparse;
pub mod strength;

pub use error::{AmgError, Result};
pub use sparse::CsrMatrix;
