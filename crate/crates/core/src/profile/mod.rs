//! Dirichlet-process mixture ("profile regression") over covariates and
//! imputed potential-outcome vectors.

mod chain;
mod conjugate;
mod data;
mod density;
mod prior;
mod selection;
mod split_merge;
mod state;
mod stick;
mod sweep;

pub use chain::*;
pub use conjugate::*;
pub use data::ProfileData;
pub use density::*;
pub use prior::*;
pub use selection::*;
pub use split_merge::{log_stick_marginal, SPLIT_MERGE_PROPOSALS};
pub use state::*;
pub use stick::*;
pub use sweep::*;
