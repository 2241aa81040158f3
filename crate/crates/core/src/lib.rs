//! Two-stage patient stratification for multi-arm trials.
//!
//! Stage 1 fits a sum-of-trees regression of the outcome on covariates and
//! treatment and imputes every subject's potential outcome under each arm.
//! Stage 2 clusters subjects on their covariates and imputed outcome vector
//! with a Dirichlet-process mixture ("profile regression") with per-cluster
//! variable selection. The chain is summarised by a posterior similarity
//! matrix, from which PAM and the average silhouette width pick a single
//! representative partition.

pub mod bart;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod profile;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
