use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::data::EmpiricalReference;

/// `μ*_{c,j} = γ μ_{c,j} + (1 − γ) x̄_j`.
pub fn effective_mean(selected: bool, mean: f64, reference: f64) -> f64 {
    if selected {
        mean
    } else {
        reference
    }
}

/// Sparsity prior on a selection probability: an atom at zero with weight
/// `atom` mixed with Beta(a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPrior {
    pub atom: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for SelectionPrior {
    fn default() -> Self {
        SelectionPrior {
            atom: 0.5,
            a: 0.5,
            b: 0.5,
        }
    }
}

impl SelectionPrior {
    /// Draws ρ given `selected` of `total` switches on, with ρ marginalised
    /// over the two prior components.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, selected: usize, total: usize, rng: &mut R) -> f64 {
        let (s, c) = (selected as f64, total as f64);
        if selected == 0 {
            let log_atom = self.atom.ln();
            let log_slab = (1.0 - self.atom).ln() + ln_beta(self.a, self.b + c) - ln_beta(self.a, self.b);
            let p_atom = 1.0 / (1.0 + (log_slab - log_atom).exp());
            if rng.random::<f64>() < p_atom {
                return 0.0;
            }
        }
        Beta::new(self.a + s, self.b + c - s)
            .expect("positive beta parameters")
            .sample(rng)
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.atom {
            0.0
        } else {
            Beta::new(self.a, self.b).expect("positive").sample(rng)
        }
    }
}

/// Selection probabilities ρ_j (continuous covariates first, then
/// discrete) and the data-wide reference profile. The per-cluster switches
/// γ_{c,j} travel with their cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSelectionState {
    pub enabled: bool,
    pub rho: Vec<f64>,
    pub reference: EmpiricalReference,
}
