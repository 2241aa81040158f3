//! Simulation scenarios and replicated experiments.

mod experiment;
mod scenarios;

pub use experiment::*;
pub use scenarios::*;
