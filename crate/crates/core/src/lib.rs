//! Differentially private k-means clustering.
//!
//! The pipeline reduces the input to a low-dimensional unit ball, selects
//! candidate centers by running a polynomial-time exponential mechanism over
//! a ladder of geometrically growing grids (private maximum coverage), builds
//! a noisy weighted proxy dataset from the candidates, clusters the proxy
//! with ordinary weighted Lloyd iterations, and finally releases per-cluster
//! means through a calibrated noisy-averaging routine. A privacy accountant
//! composes the per-stage losses into the overall `(eps, delta)` guarantee.
//!
//! Modules mirror the stages:
//!
//! * [`core`] - datasets, the k-means objective, seeded randomness
//! * [`mechanisms`] - Laplace/Gaussian noise, the coverage exponential
//!   mechanism, private averaging
//! * [`preprocess`] - random projection, scaling, unit-ball projection
//! * [`gridcover`] - grid ladders, offset enumeration, private max coverage
//! * [`clustering`] - weighted k-means++ seeding and Lloyd iterations
//! * [`pipeline`] - the end-to-end private algorithm and the accountant

pub mod clustering;
pub mod core;
mod error;
pub mod gridcover;
pub mod mechanisms;
pub mod pipeline;
pub mod preprocess;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
