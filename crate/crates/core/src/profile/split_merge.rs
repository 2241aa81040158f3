//! Sequentially-allocated split–merge Metropolis–Hastings move.
//!
//! Single-site allocation updates cannot empty a well-populated component or
//! seed a new one when the component prior is diffuse, so the chain keeps
//! whatever number of clusters it happened to reach. This move proposes to
//! merge two components or split one in two, targeting the distribution of
//! labelled allocations with the stick variables and the component parameters
//! integrated out. The sweep redraws both from their exact conditionals
//! straight afterwards, which keeps the composite kernel valid.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::conjugate::{dirichlet_log_marginal, GaussianStats, NiwParams};
use super::data::ProfileData;
use super::prior::PriorSpec;
use super::state::{ChainState, ClusterParams};
use crate::error::Result;
use crate::linalg::SpdFactor;

/// Split–merge proposals attempted per sweep.
pub const SPLIT_MERGE_PROPOSALS: usize = 3;

/// Sufficient statistics of one candidate component.
#[derive(Debug, Clone)]
struct Block {
    outcome: GaussianStats,
    continuous: GaussianStats,
    discrete: Vec<Vec<usize>>,
}

impl Block {
    fn empty(data: &ProfileData) -> Self {
        Self {
            outcome: GaussianStats::empty(data.arms()),
            continuous: GaussianStats::empty(data.p1()),
            discrete: data.categories().iter().map(|&k| vec![0; k]).collect(),
        }
    }

    fn of(data: &ProfileData, members: impl IntoIterator<Item = usize>) -> Self {
        let mut block = Self::empty(data);
        for i in members {
            block.push(data, i);
        }
        block
    }

    fn push(&mut self, data: &ProfileData, i: usize) {
        self.outcome.push(data.outcome_row(i));
        if data.p1() > 0 {
            self.continuous.push(data.continuous_row(i));
        }
        for (counts, &x) in self.discrete.iter_mut().zip(data.discrete_row(i)) {
            counts[x as usize - 1] += 1;
        }
    }

    fn size(&self) -> usize {
        self.outcome.count
    }

    /// Log marginal likelihood of the block's members with all component
    /// parameters integrated out.
    fn log_marginal(&self, prior: &PriorSpec) -> Result<f64> {
        let mut out = prior.outcome.log_marginal(&self.outcome)?;
        if let Some(cov) = &prior.covariates {
            out += cov.log_marginal(&self.continuous)?;
        }
        for (a, counts) in prior.dirichlet.iter().zip(&self.discrete) {
            out += dirichlet_log_marginal(a, counts);
        }
        Ok(out)
    }
}

/// Log probability of labelled component sizes under stick-breaking with
/// the sticks integrated out: Π_c B(1 + n_c, α + m_c) / B(1, α), where m_c
/// counts subjects on later labels.
pub fn log_stick_marginal(counts: &[usize], alpha: f64) -> f64 {
    let last = match counts.iter().rposition(|&n| n > 0) {
        Some(c) => c,
        None => return 0.0,
    };
    let mut tail: usize = counts.iter().sum();
    let mut out = 0.0;
    for &n in &counts[..=last] {
        tail -= n;
        let (a, b) = (1.0 + n as f64, alpha + tail as f64);
        out += ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b) + alpha.ln();
    }
    out
}

/// Smallest label carrying no subjects.
fn first_unused(counts: &[usize]) -> usize {
    counts.iter().position(|&n| n == 0).unwrap_or(counts.len())
}

/// Posterior predictive of one candidate component: multivariate-t
/// densities of the Gaussian blocks and Dirichlet-multinomial masses.
struct Predictive {
    gaussians: Vec<PredictiveT>,
    log_disc: Vec<Vec<f64>>,
}

struct PredictiveT {
    mean: Vec<f64>,
    factor: SpdFactor,
    dof: f64,
    log_norm: f64,
}

impl PredictiveT {
    fn new(prior: &NiwParams, stats: &GaussianStats) -> Result<Self> {
        let post = prior.posterior(stats);
        let d = post.dim() as f64;
        let dof = post.dof - d + 1.0;
        let scale = &post.scale * ((post.kappa + 1.0) / (post.kappa * dof));
        let factor = SpdFactor::new(&scale, "split-merge predictive scale")?;
        let log_norm = ln_gamma(0.5 * (dof + d)) - ln_gamma(0.5 * dof) - 0.5 * d * (dof * std::f64::consts::PI).ln()
            - 0.5 * factor.log_det();
        Ok(Self {
            mean: post.mean.as_slice().to_vec(),
            factor,
            dof,
            log_norm,
        })
    }

    fn log_density(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = x.len();
        let (diff, rest) = scratch.split_at_mut(d);
        for ((t, a), b) in diff.iter_mut().zip(x).zip(&self.mean) {
            *t = a - b;
        }
        let q = self.factor.mahalanobis_sq(diff, rest);
        self.log_norm - 0.5 * (self.dof + d as f64) * (q / self.dof).ln_1p()
    }
}

impl Predictive {
    fn new(block: &Block, prior: &PriorSpec) -> Result<Self> {
        let mut gaussians = vec![PredictiveT::new(&prior.outcome, &block.outcome)?];
        if let Some(cov) = &prior.covariates {
            gaussians.push(PredictiveT::new(cov, &block.continuous)?);
        }
        let log_disc = prior
            .dirichlet
            .iter()
            .zip(&block.discrete)
            .map(|(a, counts)| {
                let total: f64 = a.iter().sum::<f64>() + counts.iter().sum::<usize>() as f64;
                a.iter().zip(counts).map(|(a, &c)| ((a + c as f64) / total).ln()).collect()
            })
            .collect();
        Ok(Self { gaussians, log_disc })
    }

    fn log_density(&self, data: &ProfileData, i: usize, scratch: &mut [f64]) -> f64 {
        let mut out = self.gaussians[0].log_density(data.outcome_row(i), scratch);
        if let Some(cont) = self.gaussians.get(1) {
            out += cont.log_density(data.continuous_row(i), scratch);
        }
        for (logs, &code) in self.log_disc.iter().zip(data.discrete_row(i)) {
            out += logs[code as usize - 1];
        }
        out
    }
}

/// Sequentially allocates `rest` between the blocks seeded by `i` and `j`,
/// either sampling each choice or forcing the one given by `forced`.
/// Returns both blocks, which subjects went to `j`'s side, and the log
/// probability of the realised sequence of choices.
fn allocate_sequentially<R: Rng + ?Sized>(
    data: &ProfileData,
    prior: &PriorSpec,
    i: usize,
    j: usize,
    rest: &[usize],
    forced: Option<&dyn Fn(usize) -> bool>,
    rng: &mut R,
) -> Result<(Block, Block, Vec<usize>, f64)> {
    let mut a = Block::of(data, [i]);
    let mut b = Block::of(data, [j]);
    let mut pred_a = Predictive::new(&a, prior)?;
    let mut pred_b = Predictive::new(&b, prior)?;
    let mut scratch = vec![0.0; 2 * data.p1().max(data.arms())];
    let mut to_b = Vec::new();
    let mut log_q = 0.0;
    for &k in rest {
        let score_a = (a.size() as f64).ln() + pred_a.log_density(data, k, &mut scratch);
        let score_b = (b.size() as f64).ln() + pred_b.log_density(data, k, &mut scratch);
        // log P(choose b) = -log(1 + exp(score_a - score_b)), stably.
        let log_pb = -log1p_exp(score_a - score_b);
        let log_pa = -log1p_exp(score_b - score_a);
        let choose_b = match forced {
            Some(f) => f(k),
            None => rng.random::<f64>().ln() < log_pb,
        };
        if choose_b {
            log_q += log_pb;
            b.push(data, k);
            pred_b = Predictive::new(&b, prior)?;
            to_b.push(k);
        } else {
            log_q += log_pa;
            a.push(data, k);
            pred_a = Predictive::new(&a, prior)?;
        }
    }
    Ok((a, b, to_b, log_q))
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Attempts [`SPLIT_MERGE_PROPOSALS`] split–merge moves. Only valid when the
/// component parameters are fully collapsible, i.e. with variable selection
/// off; the caller skips it otherwise.
pub(super) fn split_merge(state: &mut ChainState, data: &ProfileData, prior: &PriorSpec) -> Result<()> {
    let n = data.n();
    if n < 2 {
        return Ok(());
    }
    for _ in 0..SPLIT_MERGE_PROPOSALS {
        let i = state.rng.random_range(0..n);
        let mut j = state.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if state.alloc[i] == state.alloc[j] {
            propose_split(state, data, prior, i, j)?;
        } else {
            propose_merge(state, data, prior, i, j)?;
        }
    }
    Ok(())
}

fn propose_split(state: &mut ChainState, data: &ProfileData, prior: &PriorSpec, i: usize, j: usize) -> Result<()> {
    let l = state.alloc[i];
    let mut rest: Vec<usize> = (0..data.n()).filter(|&k| k != i && k != j && state.alloc[k] == l).collect();
    rest.shuffle(&mut state.rng);

    let whole = Block::of(data, rest.iter().copied().chain([i, j]));
    let (a, b, to_b, log_q) = allocate_sequentially(data, prior, i, j, &rest, None, &mut state.rng)?;

    let counts = state.counts();
    let t = first_unused(&counts);
    let mut split_counts = counts.clone();
    if t == split_counts.len() {
        split_counts.push(0);
    }
    split_counts[l] = a.size();
    split_counts[t] = b.size();

    let log_ratio = a.log_marginal(prior)? + b.log_marginal(prior)? - whole.log_marginal(prior)?
        + log_stick_marginal(&split_counts, state.sticks.alpha)
        - log_stick_marginal(&counts, state.sticks.alpha)
        - log_q;
    if state.rng.random::<f64>().ln() < log_ratio {
        if t == state.n_components() {
            let fresh = ClusterParams::from_prior(prior, &state.selection, &mut state.rng)?;
            state.clusters.push(fresh);
            state.sticks.push(0.5);
        }
        for k in to_b.into_iter().chain([j]) {
            state.alloc[k] = t;
        }
    }
    Ok(())
}

fn propose_merge(state: &mut ChainState, data: &ProfileData, prior: &PriorSpec, i: usize, j: usize) -> Result<()> {
    let (l, m) = (state.alloc[i], state.alloc[j]);
    let counts = state.counts();
    let mut merged_counts = counts.clone();
    merged_counts[l] += merged_counts[m];
    merged_counts[m] = 0;
    // The reverse split would place j's side on the first unused label.
    if first_unused(&merged_counts) != m {
        return Ok(());
    }

    let mut rest: Vec<usize> = (0..data.n())
        .filter(|&k| k != i && k != j && (state.alloc[k] == l || state.alloc[k] == m))
        .collect();
    rest.shuffle(&mut state.rng);
    let alloc = &state.alloc;
    let on_m = |k: usize| alloc[k] == m;
    let (a, b, _, log_q) = allocate_sequentially(data, prior, i, j, &rest, Some(&on_m), &mut state.rng)?;
    let whole = Block::of(data, rest.iter().copied().chain([i, j]));

    let log_ratio = whole.log_marginal(prior)? - a.log_marginal(prior)? - b.log_marginal(prior)?
        + log_stick_marginal(&merged_counts, state.sticks.alpha)
        - log_stick_marginal(&counts, state.sticks.alpha)
        + log_q;
    if state.rng.random::<f64>().ln() < log_ratio {
        for z in state.alloc.iter_mut() {
            if *z == m {
                *z = l;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stick_marginal_single_cluster() {
        // One component holding all n subjects: B(1+n, α)/B(1, α) = α·Γ(1+n)Γ(α)/Γ(1+n+α).
        let (n, alpha) = (4usize, 1.5f64);
        let expected = alpha.ln() + ln_gamma(1.0 + n as f64) + ln_gamma(alpha) - ln_gamma(1.0 + n as f64 + alpha);
        assert!((log_stick_marginal(&[n], alpha) - expected).abs() < 1e-12);
    }

    #[test]
    fn stick_marginal_matches_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{Beta, Distribution};
        // E[π_1^2 π_2] with V_c ~ Beta(1, α), π_1 = V_1, π_2 = V_2 (1 − V_1).
        let alpha = 0.8;
        let exact = log_stick_marginal(&[2, 1], alpha).exp();
        let beta = Beta::new(1.0, alpha).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let draws = 400_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let v1: f64 = beta.sample(&mut rng);
            let v2: f64 = beta.sample(&mut rng);
            let x = v1 * v1 * v2 * (1.0 - v1);
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / draws as f64;
        let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn trailing_empty_labels_contribute_nothing() {
        let a = log_stick_marginal(&[3, 0, 2], 1.2);
        let b = log_stick_marginal(&[3, 0, 2, 0, 0], 1.2);
        assert_eq!(a, b);
    }

    #[test]
    fn predictive_is_ratio_of_marginals() {
        let data = ProfileData::from_parts(
            2,
            vec![3],
            2,
            vec![0.1, 0.4, -0.3, 0.9, 1.2, 0.2, 0.0, -0.5],
            vec![1, 3, 3, 2],
            vec![1.0, 2.0, 0.5, 1.5, -0.2, 0.3, 2.2, 1.1],
        )
        .unwrap();
        let prior = PriorSpec::default_for(&data).unwrap();
        let mut scratch = vec![0.0; 4];
        for members in [vec![0], vec![0, 1], vec![0, 1, 2]] {
            let block = Block::of(&data, members.iter().copied());
            let mut grown = block.clone();
            grown.push(&data, 3);
            let want = grown.log_marginal(&prior).unwrap() - block.log_marginal(&prior).unwrap();
            let got = Predictive::new(&block, &prior).unwrap().log_density(&data, 3, &mut scratch);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn first_unused_label() {
        assert_eq!(first_unused(&[2, 0, 1]), 1);
        assert_eq!(first_unused(&[2, 1]), 2);
    }
}
