//! Bayesian bipartite record linkage.
//!
//! The pipeline: compare two files field by field into hashed
//! [`comparison::ComparisonData`], draw matchings from the posterior with the
//! Gibbs [`sampler`], and reduce the draws to a point estimate with the
//! loss-minimizing [`estimator`].

pub mod blocking;
pub mod comparison;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod model;
pub mod registry;
pub mod rng;
pub mod sampler;

pub use error::{LinkError, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
