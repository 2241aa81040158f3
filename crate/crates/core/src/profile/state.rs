use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::conjugate::sample_dirichlet;
use super::data::ProfileData;
use super::prior::PriorSpec;
use super::selection::{effective_mean, VariableSelectionState};
use super::stick::StickState;
use crate::error::Result;
use crate::rng::{rng_from, SamplerRng};

/// Parameters of one mixture component together with its selection
/// switches (continuous covariates first, then discrete).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub cont_mean: Vec<f64>,
    pub cont_cov: DMatrix<f64>,
    pub disc_probs: Vec<Vec<f64>>,
    pub out_mean: Vec<f64>,
    pub out_cov: DMatrix<f64>,
    pub gamma: Vec<bool>,
}

impl ClusterParams {
    /// A draw from the prior; switches are Bernoulli(ρ_j).
    pub fn from_prior<R: Rng + ?Sized>(
        prior: &PriorSpec,
        selection: &VariableSelectionState,
        rng: &mut R,
    ) -> Result<Self> {
        let (cont_mean, cont_cov) = match &prior.covariates {
            Some(p) => {
                let (m, s) = p.sample(rng, "covariate prior")?;
                (m.as_slice().to_vec(), s)
            }
            None => (Vec::new(), DMatrix::zeros(0, 0)),
        };
        let disc_probs = prior.dirichlet.iter().map(|a| sample_dirichlet(a, rng)).collect();
        let (m, s) = prior.outcome.sample(rng, "outcome prior")?;
        let gamma = selection
            .rho
            .iter()
            .map(|&r| !selection.enabled || rng.random::<f64>() < r)
            .collect();
        Ok(ClusterParams {
            cont_mean,
            cont_cov,
            disc_probs,
            out_mean: m.as_slice().to_vec(),
            out_cov: s,
            gamma,
        })
    }

    /// μ* of the continuous block.
    pub fn effective_cont_mean(&self, reference: &[f64]) -> Vec<f64> {
        self.cont_mean
            .iter()
            .enumerate()
            .map(|(j, &m)| effective_mean(self.gamma[j], m, reference[j]))
            .collect()
    }

    /// Category probabilities actually used for each discrete covariate.
    pub fn effective_disc_probs(&self, reference: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p1 = self.cont_mean.len();
        self.disc_probs
            .iter()
            .enumerate()
            .map(|(j, p)| if self.gamma[p1 + j] { p.clone() } else { reference[j].clone() })
            .collect()
    }
}

/// Full sampler state.
#[derive(Debug, Clone)]
pub struct ChainState {
    /// 0-based component index per subject.
    pub alloc: Vec<usize>,
    pub sticks: StickState,
    pub clusters: Vec<ClusterParams>,
    pub selection: VariableSelectionState,
    pub rng: SamplerRng,
    pub iteration: u64,
    /// Random-walk step size for log α.
    pub alpha_step: f64,
    /// Adapt `alpha_step` during the current sweep.
    pub adapt: bool,
    pub alpha_proposals: u64,
    pub alpha_accepts: u64,
    /// Count of rejected covariance draws (reject-and-retain).
    pub numerical_warnings: u64,
}

impl ChainState {
    /// Random allocation of the subjects to `initial_clusters` components,
    /// α at its prior mean, sticks and parameters from the prior.
    pub fn initialize(
        data: &ProfileData,
        prior: &PriorSpec,
        variable_selection: bool,
        initial_clusters: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng_from(seed);
        let p = data.p1() + data.p2();
        let selection = VariableSelectionState {
            enabled: variable_selection,
            rho: vec![if variable_selection { 0.5 } else { 1.0 }; p],
            reference: data.reference().clone(),
        };
        let c0 = initial_clusters.clamp(1, data.n().max(1));
        let alloc: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..c0)).collect();
        let alpha = prior.alpha.mean();
        let beta = Beta::new(1.0, alpha).expect("positive alpha");
        let v = (0..c0).map(|_| beta.sample(&mut rng)).collect();
        let clusters = (0..c0)
            .map(|_| {
                let mut c = ClusterParams::from_prior(prior, &selection, &mut rng)?;
                c.gamma.iter_mut().for_each(|g| *g = true);
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut state = ChainState {
            alloc,
            sticks: StickState::new(v, alpha),
            clusters,
            selection,
            rng,
            iteration: 0,
            alpha_step: 1.0,
            adapt: false,
            alpha_proposals: 0,
            alpha_accepts: 0,
            numerical_warnings: 0,
        };
        state.prune_trailing();
        Ok(state)
    }

    pub fn n_components(&self) -> usize {
        self.clusters.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.clusters.len()];
        for &z in &self.alloc {
            counts[z] += 1;
        }
        counts
    }

    /// Number of occupied components.
    pub fn occupied(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }

    /// Drops components beyond the last occupied one (keeping at least one).
    pub fn prune_trailing(&mut self) {
        let keep = self.alloc.iter().map(|&z| z + 1).max().unwrap_or(1);
        self.clusters.truncate(keep);
        self.sticks.truncate(keep);
    }

    /// Labels 1..=k numbering occupied components in internal order, and the
    /// internal component behind each label.
    pub fn compact_labels(&self) -> (Vec<u32>, Vec<usize>) {
        let counts = self.counts();
        let mut map = vec![0u32; counts.len()];
        let mut order = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                order.push(c);
                map[c] = order.len() as u32;
            }
        }
        (self.alloc.iter().map(|&z| map[z]).collect(), order)
    }

    /// Swaps the labels of two components, carrying their parameters and
    /// members along (stick variables stay in place).
    pub fn swap_labels(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.clusters.swap(a, b);
        for z in self.alloc.iter_mut() {
            if *z == a {
                *z = b;
            } else if *z == b {
                *z = a;
            }
        }
    }
}

/// Per-cluster summary stored with a retained iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub size: usize,
    /// μ* of each continuous covariate.
    pub cont_mean: Vec<f64>,
    /// Effective category probabilities of each discrete covariate.
    pub disc_probs: Vec<Vec<f64>>,
    pub out_mean: Vec<f64>,
    pub gamma: Vec<bool>,
}

/// One retained iteration of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub alpha: f64,
    /// Compacted 1-based labels.
    pub allocation: Vec<u32>,
    /// Cluster `k` of `allocation` is `clusters[k - 1]`.
    pub clusters: Vec<ClusterSnapshot>,
    pub rho: Vec<f64>,
}

impl TraceRecord {
    pub fn from_state(state: &ChainState) -> Self {
        let (allocation, order) = state.compact_labels();
        let counts = state.counts();
        let reference = &state.selection.reference;
        let clusters = order
            .iter()
            .map(|&c| {
                let p = &state.clusters[c];
                ClusterSnapshot {
                    size: counts[c],
                    cont_mean: p.effective_cont_mean(&reference.means),
                    disc_probs: p.effective_disc_probs(&reference.proportions),
                    out_mean: p.out_mean.clone(),
                    gamma: p.gamma.clone(),
                }
            })
            .collect();
        TraceRecord {
            iteration: state.iteration,
            alpha: state.sticks.alpha,
            allocation,
            clusters,
            rho: state.selection.rho.clone(),
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }
}
