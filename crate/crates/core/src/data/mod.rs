//! Dataset ingestion, schema validation and outcome transforms.

mod dataset;
mod schema;
mod summary;
mod utility;

pub use dataset::{CategoryEncoding, Dataset};
pub use schema::{CovariateKind, CovariateSpec, Schema, UtilityConfig, UtilitySpec};
pub use summary::{summarize_columns, EmpiricalReference};
pub use utility::compute_utility;
