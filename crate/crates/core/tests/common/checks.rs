//! Composite checks used both by the focused test files and the acceptance run.
//! Each returns a short summary on success and a diagnosis on failure.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

use stratify::linalg::SpdFactor;
use stratify::metrics::{adjusted_rand_index, completeness, homogeneity};
use stratify::postprocess::{pam_partition, score_matrix};
use stratify::profile::{
    collapsed_cont_log_marginal, dirichlet_log_marginal, gibbs_sweep, run_chain_observed, stick_weights, ChainConfig,
    ChainState, GammaPrior, GaussianStats, NiwParams, PriorSpec, ProfileData, SelectionPrior,
};

use super::*;

pub type Check = std::result::Result<String, String>;

/// ARI, homogeneity and completeness agree exactly (to rounding) with the
/// brute-force definitions on every pair of partitions of 2 ≤ n ≤ `max_n`
/// items (a single subject has no pairs and is rejected by design).
pub fn metrics_match_brute_force(max_n: usize) -> Check {
    let mut pairs = 0usize;
    for n in 2..=max_n {
        let parts = set_partitions(n);
        for a in &parts {
            for b in &parts {
                let checks = [
                    ("ari", adjusted_rand_index(a, b).map_err(|e| e.to_string())?, ari_oracle(a, b)),
                    ("homogeneity", homogeneity(a, b).map_err(|e| e.to_string())?, homogeneity_oracle(a, b)),
                    ("completeness", completeness(a, b).map_err(|e| e.to_string())?, completeness_oracle(a, b)),
                ];
                for (name, got, want) in checks {
                    if (got - want).abs() > 1e-12 {
                        return Err(format!("{name}({a:?}, {b:?}) = {got}, oracle {want}"));
                    }
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} partition pairs"))
}

/// Random symmetric dissimilarity with zero diagonal.
pub fn random_dissimilarity<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// PAM reaches the exhaustive k-medoids optimum on random small instances.
pub fn pam_matches_exhaustive(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..instances {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..=n);
        let d = random_dissimilarity(n, &mut rng);
        let pam = pam_partition(&d, n, k).map_err(|e| e.to_string())?;
        let best = exhaustive_kmedoids_cost(&d, n, k);
        if (pam.cost - best).abs() > 1e-9 {
            return Err(format!("instance {t} (n={n}, k={k}): PAM cost {} vs optimum {best}", pam.cost));
        }
    }
    Ok(format!("{instances} instances"))
}

/// Conjugate marginals against numerical integration on ≤ 5-point data.
pub fn conjugate_match_numeric() -> Check {
    let datasets: [&[f64]; 4] = [&[], &[0.3], &[1.0, -0.5, 2.2], &[0.1, 0.2, 0.15, -0.3, 4.0]];
    let (m0, kappa, lambda, nu) = (0.4, 0.7, 1.3, 3.5);
    let prior = NiwParams {
        mean: DVector::from_element(1, m0),
        kappa,
        scale: DMatrix::from_element(1, 1, lambda),
        dof: nu,
    };
    let mut worst: f64 = 0.0;
    for x in datasets {
        let stats = GaussianStats::from_rows(1, x.iter().map(std::slice::from_ref));
        let got = prior.log_marginal(&stats).map_err(|e| e.to_string())?;
        let numeric = niw_1d_log_marginal_numeric(x, m0, kappa, lambda, nu);
        let sequential = niw_1d_log_marginal_sequential(x, m0, kappa, lambda, nu);
        for (name, want) in [("numeric", numeric), ("sequential", sequential)] {
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > 1e-8 {
                return Err(format!("NIW log marginal of {x:?}: {got} vs {name} {want}"));
            }
        }

        // Mean integrated out given σ²: numerical integral over μ.
        let sigma2: f64 = 0.8;
        let sigma = DMatrix::from_element(1, 1, sigma2);
        let factor = SpdFactor::new(&sigma, "test").map_err(|e| e.to_string())?;
        let reference = DVector::from_element(1, -0.2);
        let got_on = collapsed_cont_log_marginal(&stats, &reference, &[true], &sigma, &factor, &prior)
            .map_err(|e| e.to_string())?;
        let normal = |v: f64, m: f64, s2: f64| -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (v - m).powi(2) / (2.0 * s2);
        let want_on = log_integral(
            |mu| normal(mu, m0, sigma2 / kappa) + x.iter().map(|&v| normal(v, mu, sigma2)).sum::<f64>(),
            m0 - 60.0,
            m0 + 60.0,
            240_000,
        );
        let want_off: f64 = x.iter().map(|&v| normal(v, -0.2, sigma2)).sum();
        let got_off = collapsed_cont_log_marginal(&stats, &reference, &[false], &sigma, &factor, &prior)
            .map_err(|e| e.to_string())?;
        for (name, got, want) in [("selected", got_on, want_on), ("deselected", got_off, want_off)] {
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > 1e-8 {
                return Err(format!("collapsed {name} marginal of {x:?}: {got} vs {want}"));
            }
        }
    }
    for (a, counts) in [([1.0, 1.0], [0usize, 0usize]), ([0.5, 0.5], [2, 3]), ([2.0, 0.7], [4, 1])] {
        let got = dirichlet_log_marginal(&a, &counts);
        let want = beta_binomial_log_numeric(a[0], a[1], counts[0], counts[1]);
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > 1e-8 {
            return Err(format!("Dirichlet marginal {a:?}/{counts:?}: {got} vs {want}"));
        }
    }
    Ok(format!("max abs error {worst:.1e}"))
}

fn no_data_prior() -> PriorSpec {
    PriorSpec {
        covariates: Some(NiwParams {
            mean: DVector::zeros(1),
            kappa: 0.01,
            scale: DMatrix::identity(1, 1),
            dof: 3.0,
        }),
        outcome: NiwParams {
            mean: DVector::zeros(2),
            kappa: 0.01,
            scale: DMatrix::identity(2, 2),
            dof: 4.0,
        },
        dirichlet: vec![vec![1.0, 1.0]],
        alpha: GammaPrior { shape: 2.0, rate: 1.0 },
        selection: SelectionPrior::default(),
    }
}

/// Successive-conditional run with no data reproduces the prior moments of
/// α, α² and V₁ within 3 Monte Carlo standard errors.
pub fn geweke_prior_reproduction(sweeps: usize, seed: u64) -> Check {
    let data = ProfileData::empty(1, vec![2], 2);
    let prior = no_data_prior();
    let mut state = ChainState::initialize(&data, &prior, false, 1, seed).map_err(|e| e.to_string())?;
    let burn_in = 2000;
    let mut alpha = Vec::with_capacity(sweeps);
    let mut v1 = Vec::with_capacity(sweeps);
    for it in 0..burn_in + sweeps {
        state.adapt = it < burn_in;
        gibbs_sweep(&mut state, &data, &prior).map_err(|e| e.to_string())?;
        if it >= burn_in {
            alpha.push(state.sticks.alpha);
            v1.push(state.sticks.v()[0]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let gamma = Gamma::new(prior.alpha.shape, 1.0 / prior.alpha.rate).unwrap();
    let direct = 100_000;
    let mut d_alpha = Vec::with_capacity(direct);
    let mut d_v1 = Vec::with_capacity(direct);
    for _ in 0..direct {
        let a: f64 = gamma.sample(&mut rng);
        d_alpha.push(a);
        d_v1.push(Beta::new(1.0, a).unwrap().sample(&mut rng));
    }
    let squares = |xs: &[f64]| xs.iter().map(|x| x * x).collect::<Vec<_>>();
    let mut summary = Vec::new();
    for (name, chain, draws) in [
        ("E[alpha]", alpha.clone(), d_alpha.clone()),
        ("E[alpha^2]", squares(&alpha), squares(&d_alpha)),
        ("E[V1]", v1.clone(), d_v1.clone()),
    ] {
        let chain_mean = chain.iter().sum::<f64>() / chain.len() as f64;
        let chain_se = batch_means_se(&chain, 50);
        let (direct_mean, direct_se) = mean_and_se(&draws);
        let se = (chain_se.powi(2) + direct_se.powi(2)).sqrt();
        let z = (chain_mean - direct_mean) / se;
        summary.push(format!("{name} {chain_mean:.3} vs {direct_mean:.3} (z={z:.2})"));
        if z.abs() > 3.0 {
            return Err(summary.join("; "));
        }
    }
    Ok(summary.join("; "))
}

/// Two well-separated groups of subjects with one continuous, one binary
/// covariate and a two-arm outcome.
pub fn two_group_data(n: usize, seed: u64) -> ProfileData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cont, mut disc, mut out) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let g = (i % 2) as f64;
        let noise = |rng: &mut ChaCha8Rng| rng.random::<f64>() - 0.5;
        cont.push(3.0 * g + 0.3 * noise(&mut rng));
        disc.push(if rng.random::<f64>() < 0.2 + 0.6 * g { 2 } else { 1 });
        out.push(-1.0 + 2.0 * g + 0.3 * noise(&mut rng));
        out.push(1.0 - 2.0 * g + 0.3 * noise(&mut rng));
    }
    ProfileData::from_parts(1, vec![2], 2, cont, disc, out).unwrap()
}

/// Stick identity and score-matrix structure on every retained iteration,
/// and the retained trace length.
pub fn sampler_invariants(variable_selection: bool, seed: u64) -> Check {
    let data = two_group_data(40, seed);
    let prior = PriorSpec::default_for(&data).map_err(|e| e.to_string())?;
    let cfg = ChainConfig {
        iterations: 300,
        burn_in: 100,
        seed,
        initial_clusters: 5,
        variable_selection,
    };
    let mut problems = Vec::new();
    let mut checked = 0;
    let out = run_chain_observed(&data, &prior, &cfg, |state, record| {
        checked += 1;
        let recomputed = stick_weights(state.sticks.v());
        let stored = state.sticks.weights();
        if recomputed.len() != stored.len() || recomputed.iter().zip(stored).any(|(a, b)| (a - b).abs() > 1e-12) {
            problems.push(format!("iteration {}: stick weights drifted", record.iteration));
        }
        if stored.iter().sum::<f64>() > 1.0 + 1e-12 {
            problems.push(format!("iteration {}: weights sum above one", record.iteration));
        }
        let n = record.allocation.len();
        let s = score_matrix(&record.allocation);
        for i in 0..n {
            if s[i * n + i] != 1 {
                problems.push(format!("iteration {}: S[{i},{i}] != 1", record.iteration));
            }
            for j in 0..n {
                if s[i * n + j] > 1 || s[i * n + j] != s[j * n + i] {
                    problems.push(format!("iteration {}: S not binary symmetric at ({i},{j})", record.iteration));
                }
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if out.trace.len() != cfg.retained() {
        problems.push(format!("trace has {} records, expected {}", out.trace.len(), cfg.retained()));
    }
    match problems.first() {
        Some(p) => Err(format!("{} problems, first: {p}", problems.len())),
        None => Ok(format!("{checked} retained iterations")),
    }
}
