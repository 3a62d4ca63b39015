//! Lebesgue integral quadratures and joint distribution estimators for two processes
//! sampled on a common measure.
//!
//! The pipeline runs [`moments`] → [`spectral`] → [`joint`]: sample sums give the Gram
//! matrices `<Q_j|Q_k>` and `<Q_j|f|Q_k>`, the generalized eigenproblem turns them into
//! value-nodes and weights, and the overlaps of the f- and g-eigenvectors give value,
//! probability and density-matrix correlations.

pub mod basis;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod io;
pub mod joint;
pub mod moments;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
