//! Stage 1: single-learner sum-of-trees regression of the outcome on
//! covariates and treatment, used to impute each subject's potential outcome
//! under every arm.

mod config;
mod design;
mod potential;
mod sampler;
mod tree;

pub use config::{ProposalMix, TreeEnsembleConfig};
pub use design::{Design, Feature};
pub use potential::{impute_potential_outcomes, predict_subject, PotentialOutcomeMatrix};
pub use sampler::{fit_sum_of_trees, EnsemblePosterior, OutcomeScaling, SumOfTreesSampler, TreeEnsembleState};
pub use tree::{Node, Tree};
