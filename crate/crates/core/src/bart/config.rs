use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Proposal probabilities for the tree-structure moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalMix {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for ProposalMix {
    fn default() -> Self {
        ProposalMix {
            grow: 0.5,
            prune: 0.25,
            change: 0.25,
        }
    }
}

/// Settings of the sum-of-trees regressor. Defaults follow the usual
/// package conventions: 200 trees, depth prior 0.95·(1+d)^-2, leaf
/// shrinkage k = 2, and a σ² prior with 3 degrees of freedom placing 90% of
/// its mass below the least-squares residual variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeEnsembleConfig {
    pub trees: usize,
    pub base: f64,
    pub power: f64,
    pub leaf_k: f64,
    pub sigma_df: f64,
    pub sigma_quantile: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub proposal: ProposalMix,
    /// Minimum training rows in a leaf.
    pub min_leaf: usize,
    /// Maximum cutpoints per continuous column.
    pub numcut: usize,
    /// Keep every retained ensemble so new data can be predicted.
    pub keep_trees: bool,
}

impl Default for TreeEnsembleConfig {
    fn default() -> Self {
        TreeEnsembleConfig {
            trees: 200,
            base: 0.95,
            power: 2.0,
            leaf_k: 2.0,
            sigma_df: 3.0,
            sigma_quantile: 0.90,
            iterations: 6000,
            burn_in: 1000,
            seed: 0,
            proposal: ProposalMix::default(),
            min_leaf: 5,
            numcut: 100,
            keep_trees: false,
        }
    }
}

impl TreeEnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trees < 1 {
            return bad("tree count must be at least 1".into());
        }
        if !(self.base > 0.0 && self.base < 1.0) {
            return bad(format!("depth-prior base must lie in (0,1), got {}", self.base));
        }
        if !(self.power > 0.0) {
            return bad(format!("depth-prior power must be positive, got {}", self.power));
        }
        if !(self.leaf_k > 0.0) {
            return bad(format!("leaf shrinkage k must be positive, got {}", self.leaf_k));
        }
        if !(self.sigma_df > 0.0) {
            return bad(format!("σ² prior dof must be positive, got {}", self.sigma_df));
        }
        if !(self.sigma_quantile > 0.0 && self.sigma_quantile < 1.0) {
            return bad(format!(
                "σ² prior quantile must lie in (0,1), got {}",
                self.sigma_quantile
            ));
        }
        if self.iterations <= self.burn_in {
            return bad(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            ));
        }
        let p = self.proposal;
        if p.grow <= 0.0 || p.prune <= 0.0 || p.change < 0.0 {
            return bad("grow and prune probabilities must be positive".into());
        }
        if ((p.grow + p.prune + p.change) - 1.0).abs() > 1e-9 {
            return bad("proposal probabilities must sum to 1".into());
        }
        if self.numcut < 1 {
            return bad("numcut must be at least 1".into());
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TreeEnsembleConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_settings() {
        let mut c = TreeEnsembleConfig::default();
        c.burn_in = c.iterations;
        assert!(c.validate().is_err());
        let c = TreeEnsembleConfig { base: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TreeEnsembleConfig { trees: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
