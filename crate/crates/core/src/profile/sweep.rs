//! One Gibbs sweep of the slice-sampled stick-breaking mixture.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::conjugate::{dirichlet_log_marginal, sample_dirichlet, GaussianStats, NiwParams};
use super::data::ProfileData;
use super::prior::PriorSpec;
use super::split_merge::split_merge;
use super::state::{ChainState, ClusterParams};
use crate::error::{Error, Result};
use crate::linalg::{sample_inverse_wishart, symmetrize, SpdFactor, LN_2PI};

/// Upper bound on instantiated components; reaching it means the stick
/// weights have underflowed.
pub const MAX_COMPONENTS: usize = 5000;

/// Target acceptance rate of the adaptive random walk on log α.
const ALPHA_TARGET_ACCEPT: f64 = 0.44;

/// Largest representable stick variable below one, so that log(1 − V) stays finite.
const V_MAX: f64 = 1.0 - f64::EPSILON;

/// Advances the chain by one sweep:
/// split–merge proposals (variable selection off), sticks | allocations, α | sticks, component parameters and selection
/// switches | members, two label-switching moves, slice variables (with
/// component extension), allocations | slice, then selection
/// probabilities ρ | switches. Empty trailing components are pruned.
pub fn gibbs_sweep(state: &mut ChainState, data: &ProfileData, prior: &PriorSpec) -> Result<()> {
    if state.alloc.len() != data.n() {
        return Err(Error::Dimension(format!(
            "state allocates {} subjects, data has {}",
            state.alloc.len(),
            data.n()
        )));
    }
    state.prune_trailing();
    if !state.selection.enabled {
        split_merge(state, data, prior)?;
        state.prune_trailing();
    }
    update_sticks(state);
    update_alpha(state, prior);
    update_clusters(state, data, prior)?;
    switch_labels(state);
    let u = extend_for_slice(state, prior)?;
    allocate(state, data, &u);
    state.prune_trailing();
    update_rho(state, prior);
    state.iteration += 1;
    Ok(())
}

fn update_sticks(state: &mut ChainState) {
    let counts = state.counts();
    let alpha = state.sticks.alpha;
    let mut tail: usize = counts.iter().sum();
    let mut v = Vec::with_capacity(counts.len());
    for &nc in &counts {
        tail -= nc;
        let draw = Beta::new(1.0 + nc as f64, alpha + tail as f64)
            .expect("positive beta parameters")
            .sample(&mut state.rng);
        v.push(draw.clamp(f64::MIN_POSITIVE, V_MAX));
    }
    state.sticks.set(v);
}

/// Log posterior of log α given the stick variables.
fn log_alpha_target(log_alpha: f64, prior: &PriorSpec, n_sticks: usize, sum_log1m_v: f64) -> f64 {
    let a = log_alpha.exp();
    (prior.alpha.shape + n_sticks as f64) * log_alpha - prior.alpha.rate * a + (a - 1.0) * sum_log1m_v
}

fn update_alpha(state: &mut ChainState, prior: &PriorSpec) {
    let s: f64 = state.sticks.v().iter().map(|v| (-v).ln_1p()).sum();
    let c = state.sticks.v().len();
    let current = state.sticks.alpha.ln();
    let z: f64 = state.rng.sample(StandardNormal);
    let proposal = current + state.alpha_step * z;
    let log_ratio = log_alpha_target(proposal, prior, c, s) - log_alpha_target(current, prior, c, s);
    let accepted = state.rng.random::<f64>().ln() < log_ratio;
    if accepted {
        state.sticks.alpha = proposal.exp();
    }
    state.alpha_proposals += 1;
    state.alpha_accepts += accepted as u64;
    if state.adapt {
        let gain = (state.alpha_proposals as f64).powf(-0.6);
        let hit = if accepted { 1.0 } else { 0.0 };
        state.alpha_step = (state.alpha_step * (gain * (hit - ALPHA_TARGET_ACCEPT)).exp()).clamp(1e-3, 10.0);
    }
}

fn members_of(state: &ChainState) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); state.n_components()];
    for (i, &z) in state.alloc.iter().enumerate() {
        members[z].push(i);
    }
    members
}

fn update_clusters(state: &mut ChainState, data: &ProfileData, prior: &PriorSpec) -> Result<()> {
    let members = members_of(state);
    for (c, m) in members.iter().enumerate() {
        let updated = if m.is_empty() {
            ClusterParams::from_prior(prior, &state.selection, &mut state.rng)
        } else {
            let current = state.clusters[c].clone();
            update_cluster(&current, m, state, data, prior, c)
        };
        match updated {
            Ok(p) => state.clusters[c] = p,
            Err(e) => {
                state.numerical_warnings += 1;
                log::warn!("iteration {}: keeping previous parameters of component {c}: {e}", state.iteration);
            }
        }
    }
    Ok(())
}

fn update_cluster(
    current: &ClusterParams,
    members: &[usize],
    state: &mut ChainState,
    data: &ProfileData,
    prior: &PriorSpec,
    c: usize,
) -> Result<ClusterParams> {
    let mut next = current.clone();
    let selection_on = state.selection.enabled;
    let rng = &mut state.rng;

    let out_stats = GaussianStats::from_rows(data.arms(), members.iter().map(|&i| data.outcome_row(i)));
    let (m, s) = draw_checked(&prior.outcome.posterior(&out_stats), rng, &format!("outcome covariance of cluster {c}"))?;
    next.out_mean = m;
    next.out_cov = s;

    if let Some(cov_prior) = &prior.covariates {
        let stats = GaussianStats::from_rows(data.p1(), members.iter().map(|&i| data.continuous_row(i)));
        let context = format!("covariate covariance of cluster {c}");
        if selection_on {
            let reference = DVector::from_column_slice(&state.selection.reference.means);
            let sigma_factor = SpdFactor::new(&current.cont_cov, &context)?;
            for j in 0..data.p1() {
                let rho = state.selection.rho[j];
                let mut gamma = next.gamma[..data.p1()].to_vec();
                gamma[j] = true;
                let on = collapsed_cont_log_marginal(&stats, &reference, &gamma, &current.cont_cov, &sigma_factor, cov_prior)?;
                gamma[j] = false;
                let off = collapsed_cont_log_marginal(&stats, &reference, &gamma, &current.cont_cov, &sigma_factor, cov_prior)?;
                next.gamma[j] = draw_switch(rho, on, off, rng);
            }
            let gamma = &next.gamma[..data.p1()];
            if gamma.iter().all(|&g| g) {
                let (m, s) = draw_checked(&cov_prior.posterior(&stats), rng, &context)?;
                next.cont_mean = m;
                next.cont_cov = s;
            } else {
                let mu = draw_mean_given_cov(&stats, &reference, gamma, &current.cont_cov, cov_prior, rng, &context)?;
                let sigma = draw_cov_given_mean(&stats, &reference, gamma, &mu, cov_prior, rng, &context)?;
                next.cont_mean = mu.as_slice().to_vec();
                next.cont_cov = sigma;
            }
        } else {
            let (m, s) = draw_checked(&cov_prior.posterior(&stats), rng, &context)?;
            next.cont_mean = m;
            next.cont_cov = s;
        }
    }

    let p1 = data.p1();
    for (j, &k) in data.categories().iter().enumerate() {
        let mut counts = vec![0usize; k];
        for &i in members {
            counts[data.discrete_row(i)[j] as usize - 1] += 1;
        }
        let a = &prior.dirichlet[j];
        if selection_on {
            let on = dirichlet_log_marginal(a, &counts);
            let reference = &state.selection.reference.proportions[j];
            let off: f64 = counts
                .iter()
                .zip(reference)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, &p)| n as f64 * p.ln())
                .sum();
            next.gamma[p1 + j] = draw_switch(state.selection.rho[p1 + j], on, off, rng);
        }
        let posterior: Vec<f64> = if next.gamma[p1 + j] {
            a.iter().zip(&counts).map(|(a, &n)| a + n as f64).collect()
        } else {
            a.clone()
        };
        next.disc_probs[j] = sample_dirichlet(&posterior, rng);
    }
    Ok(next)
}

/// Draws (μ, Σ) from an NIW and checks Σ factorises before accepting it.
fn draw_checked<R: Rng + ?Sized>(niw: &NiwParams, rng: &mut R, context: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (m, s) = niw.sample(rng, context)?;
    SpdFactor::new(&s, context)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{context}: non-finite mean draw")));
    }
    Ok((m.as_slice().to_vec(), s))
}

fn draw_switch<R: Rng + ?Sized>(rho: f64, log_on: f64, log_off: f64, rng: &mut R) -> bool {
    if rho <= 0.0 {
        return false;
    }
    if rho >= 1.0 {
        return true;
    }
    let log_odds = rho.ln() - (1.0 - rho).ln() + log_on - log_off;
    let p_on = 1.0 / (1.0 + (-log_odds).exp());
    rng.random::<f64>() < p_on
}

/// Quantities of the continuous block with the mean integrated out given Σ:
/// returns (precision P, Q = κP + n·GPG, b = κP·m₀ + GP·Σd, Σ d dᵀ).
fn collapsed_terms(
    stats: &GaussianStats,
    reference: &DVector<f64>,
    gamma: &[bool],
    precision: &DMatrix<f64>,
    prior: &NiwParams,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let p = stats.dim();
    let n = stats.count as f64;
    let g = DVector::from_iterator(p, gamma.iter().map(|&x| if x { 1.0 } else { 0.0 }));
    let h = DVector::from_iterator(p, (0..p).map(|j| (1.0 - g[j]) * reference[j]));
    let sum_d = &stats.sum - &h * n;
    let scatter_d = stats.scatter_about(&h);
    let gpg = DMatrix::from_fn(p, p, |i, j| g[i] * precision[(i, j)] * g[j]);
    let q = precision * prior.kappa + gpg * n;
    let gp_sum = (precision * &sum_d).component_mul(&g);
    let b = precision * &prior.mean * prior.kappa + gp_sum;
    (symmetrize(q), b, scatter_d)
}

/// log p(x_1..n | Σ, γ) with μ ~ N(m₀, Σ/κ) integrated out, where
/// x_i ~ N(γ∘μ + (1 − γ)∘x̄, Σ).
pub fn collapsed_cont_log_marginal(
    stats: &GaussianStats,
    reference: &DVector<f64>,
    gamma: &[bool],
    sigma: &DMatrix<f64>,
    sigma_factor: &SpdFactor,
    prior: &NiwParams,
) -> Result<f64> {
    let p = stats.dim();
    let n = stats.count as f64;
    let precision = spd_inverse(sigma, "covariate covariance")?;
    let (q, b, scatter_d) = collapsed_terms(stats, reference, gamma, &precision, prior);
    let q_chol = q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite { context: "collapsed mean precision".into() })?;
    let log_det_q = 2.0 * q_chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let q_inv_b = q_chol.solve(&b);
    let m0 = &prior.mean;
    let c = (&precision * &scatter_d).trace() + prior.kappa * (m0.transpose() * &precision * m0)[(0, 0)];
    let log_det_p = -sigma_factor.log_det();
    Ok(-0.5 * n * p as f64 * LN_2PI + 0.5 * (n + 1.0) * log_det_p + 0.5 * p as f64 * prior.kappa.ln()
        - 0.5 * log_det_q
        + 0.5 * b.dot(&q_inv_b)
        - 0.5 * c)
}

fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite { context: context.to_string() })?;
    Ok(symmetrize(chol.inverse()))
}

fn draw_mean_given_cov<R: Rng + ?Sized>(
    stats: &GaussianStats,
    reference: &DVector<f64>,
    gamma: &[bool],
    sigma: &DMatrix<f64>,
    prior: &NiwParams,
    rng: &mut R,
    context: &str,
) -> Result<DVector<f64>> {
    let precision = spd_inverse(sigma, context)?;
    let (q, b, _) = collapsed_terms(stats, reference, gamma, &precision, prior);
    let q_inv = spd_inverse(&q, context)?;
    let mean = &q_inv * b;
    let draw = SpdFactor::new(&q_inv, context)?.sample_normal(mean.as_slice(), rng);
    Ok(DVector::from_vec(draw))
}

fn draw_cov_given_mean<R: Rng + ?Sized>(
    stats: &GaussianStats,
    reference: &DVector<f64>,
    gamma: &[bool],
    mu: &DVector<f64>,
    prior: &NiwParams,
    rng: &mut R,
    context: &str,
) -> Result<DMatrix<f64>> {
    let p = mu.len();
    let effective = DVector::from_iterator(p, (0..p).map(|j| if gamma[j] { mu[j] } else { reference[j] }));
    let dev = mu - &prior.mean;
    let scale = symmetrize(&prior.scale + &dev * dev.transpose() * prior.kappa + stats.scatter_about(&effective));
    let sigma = sample_inverse_wishart(&scale, prior.dof + stats.count as f64 + 1.0, rng, context)?;
    SpdFactor::new(&sigma, context)?;
    Ok(sigma)
}

fn switch_labels(state: &mut ChainState) {
    // Move 1: swap two occupied components.
    let counts = state.counts();
    let occupied: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if occupied.len() >= 2 {
        let a = state.rng.random_range(0..occupied.len());
        let mut b = state.rng.random_range(0..occupied.len() - 1);
        if b >= a {
            b += 1;
        }
        let (j, l) = (occupied[a], occupied[b]);
        let pi = state.sticks.weights();
        let log_ratio = if counts[j] == counts[l] {
            0.0
        } else {
            (counts[j] as f64 - counts[l] as f64) * (pi[l].ln() - pi[j].ln())
        };
        if state.rng.random::<f64>().ln() < log_ratio {
            state.swap_labels(j, l);
        }
    }
    // Move 2: swap adjacent labels together with their stick variables.
    let c = state.n_components();
    if c >= 2 {
        let counts = state.counts();
        let j = state.rng.random_range(0..c - 1);
        let v = state.sticks.v();
        let log_ratio = counts[j] as f64 * (-v[j + 1]).ln_1p() - counts[j + 1] as f64 * (-v[j]).ln_1p();
        // Emptying the last occupied label would shrink the range j is drawn
        // from, leaving no reverse proposal; such swaps are rejected.
        let shrinks = j + 2 == c && counts[j] == 0;
        let u: f64 = state.rng.random();
        if !shrinks && u.ln() < log_ratio {
            state.swap_labels(j, j + 1);
            state.sticks.swap_adjacent(j);
        }
    }
}

/// Draws u_i ~ U(0, π_{z_i}) and instantiates components until the
/// uninstantiated stick mass is below min u_i.
fn extend_for_slice(state: &mut ChainState, prior: &PriorSpec) -> Result<Vec<f64>> {
    let u: Vec<f64> = {
        let pi = state.sticks.weights();
        let rng = &mut state.rng;
        state.alloc.iter().map(|&z| pi[z] * (1.0 - rng.random::<f64>())).collect()
    };
    let Some(u_min) = u.iter().copied().reduce(f64::min) else {
        return Ok(u);
    };
    let beta = Beta::new(1.0, state.sticks.alpha).expect("positive alpha");
    while state.sticks.remaining() >= u_min {
        if state.n_components() >= MAX_COMPONENTS {
            state.numerical_warnings += 1;
            log::warn!(
                "iteration {}: slice needs more than {MAX_COMPONENTS} components; truncating",
                state.iteration
            );
            break;
        }
        let v = beta.sample(&mut state.rng).clamp(f64::MIN_POSITIVE, V_MAX);
        state.sticks.push(v);
        let params = ClusterParams::from_prior(prior, &state.selection, &mut state.rng)?;
        state.clusters.push(params);
    }
    Ok(u)
}

/// Precomputed per-component quantities for the allocation step.
struct ComponentCache {
    usable: bool,
    out: SpdFactor,
    out_mean: Vec<f64>,
    cont: SpdFactor,
    cont_mean: Vec<f64>,
    /// log of the effective category probabilities, per discrete covariate.
    log_disc: Vec<Vec<f64>>,
}

fn build_caches(state: &mut ChainState) -> Vec<ComponentCache> {
    let reference = &state.selection.reference;
    let mut warnings = 0;
    let caches = state
        .clusters
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let out = SpdFactor::new(&p.out_cov, &format!("outcome covariance of cluster {c}"));
            let cont = SpdFactor::new(&p.cont_cov, &format!("covariate covariance of cluster {c}"));
            let usable = out.is_ok() && cont.is_ok();
            if !usable {
                warnings += 1;
            }
            let empty = || SpdFactor::new(&DMatrix::zeros(0, 0), "").expect("empty factor");
            ComponentCache {
                usable,
                out: out.unwrap_or_else(|_| empty()),
                out_mean: p.out_mean.clone(),
                cont: cont.unwrap_or_else(|_| empty()),
                cont_mean: p.effective_cont_mean(&reference.means),
                log_disc: p
                    .effective_disc_probs(&reference.proportions)
                    .into_iter()
                    .map(|probs| probs.into_iter().map(f64::ln).collect())
                    .collect(),
            }
        })
        .collect();
    state.numerical_warnings += warnings;
    caches
}

/// Covariate and outcome log-densities of one subject under one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentLogDensity {
    pub covariates: f64,
    pub outcome: f64,
}

fn component_log_density(cache: &ComponentCache, data: &ProfileData, i: usize, scratch: &mut [f64]) -> ComponentLogDensity {
    if !cache.usable {
        return ComponentLogDensity {
            covariates: f64::NEG_INFINITY,
            outcome: f64::NEG_INFINITY,
        };
    }
    let outcome = cache.out.mvn_log_density(data.outcome_row(i), &cache.out_mean, scratch);
    let mut covariates = if data.p1() > 0 {
        cache.cont.mvn_log_density(data.continuous_row(i), &cache.cont_mean, scratch)
    } else {
        0.0
    };
    for (j, &code) in data.discrete_row(i).iter().enumerate() {
        covariates += cache.log_disc[j][code as usize - 1];
    }
    ComponentLogDensity { covariates, outcome }
}

/// Log-densities of subject `i` under every instantiated component.
pub fn subject_log_densities(state: &mut ChainState, data: &ProfileData, i: usize) -> Vec<ComponentLogDensity> {
    let caches = build_caches(state);
    let mut scratch = vec![0.0; 2 * data.p1().max(data.arms())];
    caches.iter().map(|c| component_log_density(c, data, i, &mut scratch)).collect()
}

fn allocate(state: &mut ChainState, data: &ProfileData, u: &[f64]) {
    if data.n() == 0 {
        return;
    }
    let caches = build_caches(state);
    let pi = state.sticks.weights().to_vec();
    let mut scratch = vec![0.0; 2 * data.p1().max(data.arms())];
    let mut candidates: Vec<(usize, f64)> = Vec::with_capacity(pi.len());
    for i in 0..data.n() {
        candidates.clear();
        let mut max = f64::NEG_INFINITY;
        for (c, cache) in caches.iter().enumerate() {
            if pi[c] > u[i] {
                let d = component_log_density(cache, data, i, &mut scratch);
                let lw = d.covariates + d.outcome;
                max = max.max(lw);
                candidates.push((c, lw));
            }
        }
        if max == f64::NEG_INFINITY {
            continue;
        }
        let total: f64 = candidates.iter().map(|(_, lw)| (lw - max).exp()).sum();
        let mut r = state.rng.random::<f64>() * total;
        let mut chosen = candidates[candidates.len() - 1].0;
        for &(c, lw) in &candidates {
            let w = (lw - max).exp();
            if r < w {
                chosen = c;
                break;
            }
            r -= w;
        }
        state.alloc[i] = chosen;
    }
}

fn update_rho(state: &mut ChainState, prior: &PriorSpec) {
    if !state.selection.enabled {
        return;
    }
    let total = state.n_components();
    for j in 0..state.selection.rho.len() {
        let on = state.clusters.iter().filter(|c| c.gamma[j]).count();
        state.selection.rho[j] = prior.selection.sample_posterior(on, total, &mut state.rng);
    }
}
