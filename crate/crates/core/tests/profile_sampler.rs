mod common;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use common::checks;
use common::*;
use stratify::profile::{
    log_density_outcome, run_chain, run_chain_observed, subject_log_densities, ChainConfig, ChainState, GammaPrior,
    NiwParams, PriorSpec, ProfileData, SelectionPrior,
};

fn report(check: checks::Check) {
    match check {
        Ok(summary) => println!("{summary}"),
        Err(problem) => panic!("{problem}"),
    }
}

#[test]
fn conjugate_marginals_match_numerical_integration() {
    report(checks::conjugate_match_numeric());
}

#[test]
fn geweke_prior_reproduction_of_alpha_and_first_stick() {
    report(checks::geweke_prior_reproduction(10_000, 17));
}

#[test]
fn stick_and_score_invariants_hold_every_iteration() {
    report(checks::sampler_invariants(false, 3));
    report(checks::sampler_invariants(true, 4));
}

/// Four subjects: the sampler's partition frequencies match the exact
/// posterior over all 15 set partitions, computed by enumeration with α
/// integrated numerically against its Gamma prior.
#[test]
fn partition_frequencies_match_exact_posterior() {
    let y = [0.0, 0.3, 2.5, 2.9];
    let x = [0.1, -0.2, 2.0, 2.4];
    let d = [1u32, 1, 2, 1];
    let (ym0, xm0, kappa, lambda, nu) = (1.4, 1.0, 0.5, 1.0, 3.0);
    let data = ProfileData::from_parts(1, vec![2], 1, x.to_vec(), d.to_vec(), y.to_vec()).unwrap();
    let niw = |m: f64| NiwParams {
        mean: DVector::from_element(1, m),
        kappa,
        scale: DMatrix::from_element(1, 1, lambda),
        dof: nu,
    };
    let prior = PriorSpec {
        covariates: Some(niw(xm0)),
        outcome: niw(ym0),
        dirichlet: vec![vec![1.0, 1.0]],
        alpha: GammaPrior { shape: 2.0, rate: 1.0 },
        selection: SelectionPrior::default(),
    };

    let n = y.len();
    let log_alpha_factor = |k: usize| {
        // ∫ Gamma(α; 2, 1) α^k Γ(α)/Γ(α+n) dα over t = log α
        log_integral(
            |t| {
                let a = t.exp();
                let log_gamma_pdf = a.ln() - a; // shape 2, rate 1: α e^{-α}
                log_gamma_pdf + k as f64 * t + ln_gamma(a) - ln_gamma(a + n as f64) + t
            },
            -30.0,
            8.0,
            40_000,
        )
    };
    let partitions = set_partitions(n);
    let mut log_w: Vec<f64> = partitions
        .iter()
        .map(|p| {
            let k = *p.iter().max().unwrap() as usize + 1;
            let mut lw = log_alpha_factor(k);
            for c in 0..k as u32 {
                let members: Vec<usize> = (0..n).filter(|&i| p[i] == c).collect();
                let ys: Vec<f64> = members.iter().map(|&i| y[i]).collect();
                let xs: Vec<f64> = members.iter().map(|&i| x[i]).collect();
                let ds: Vec<usize> = members.iter().map(|&i| d[i] as usize - 1).collect();
                lw += ln_gamma(members.len() as f64);
                lw += niw_1d_log_marginal_sequential(&ys, ym0, kappa, lambda, nu);
                lw += niw_1d_log_marginal_sequential(&xs, xm0, kappa, lambda, nu);
                lw += dirichlet_sequential(&[1.0, 1.0], &ds);
            }
            lw
        })
        .collect();
    let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    log_w.iter_mut().for_each(|w| *w = (*w - peak).exp());
    let total: f64 = log_w.iter().sum();
    let exact: Vec<f64> = log_w.iter().map(|w| w / total).collect();

    let cfg = ChainConfig {
        iterations: 42_000,
        burn_in: 2_000,
        seed: 23,
        initial_clusters: 2,
        variable_selection: false,
    };
    let out = run_chain(&data, &prior, &cfg).unwrap();
    let mut freq: HashMap<Vec<u32>, f64> = HashMap::new();
    for r in &out.trace {
        *freq.entry(canonical(&r.allocation)).or_default() += 1.0 / out.trace.len() as f64;
    }
    let mut worst: f64 = 0.0;
    for (p, &want) in partitions.iter().zip(&exact) {
        let got = freq.get(p).copied().unwrap_or(0.0);
        println!("{p:?}: sampled {got:.4} exact {want:.4}");
        worst = worst.max((got - want).abs());
    }
    assert!(worst < 0.02, "largest partition-probability error {worst}");
}

#[test]
fn identical_rows_are_co_allocated() {
    let n = 30;
    let data = ProfileData::from_parts(1, vec![2], 2, vec![0.5; n], vec![1; n], [1.0, 2.0].repeat(n)).unwrap();
    let prior = PriorSpec::default_for(&data).unwrap();
    let cfg = ChainConfig {
        iterations: 500,
        burn_in: 0,
        seed: 5,
        initial_clusters: 10,
        variable_selection: false,
    };
    let out = run_chain(&data, &prior, &cfg).unwrap();
    let together = out.trace.iter().filter(|r| r.n_clusters() == 1).count() as f64 / out.trace.len() as f64;
    assert!(together >= 0.9, "all co-allocated in {together} of sweeps");
}

#[test]
fn chain_is_deterministic_given_seed() {
    let data = checks::two_group_data(30, 8);
    let prior = PriorSpec::default_for(&data).unwrap();
    for variable_selection in [false, true] {
        let cfg = ChainConfig {
            iterations: 120,
            burn_in: 20,
            seed: 99,
            initial_clusters: 4,
            variable_selection,
        };
        let a = run_chain(&data, &prior, &cfg).unwrap();
        let b = run_chain(&data, &prior, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.trace.len(), 100);
    }
}

#[test]
fn identical_pair_co_clusters_more_than_distant_pair() {
    let base = checks::two_group_data(40, 12);
    let mut cont: Vec<f64> = (0..base.n()).map(|i| base.continuous_row(i)[0]).collect();
    let disc: Vec<u32> = (0..base.n()).map(|i| base.discrete_row(i)[0]).collect();
    let mut out: Vec<f64> = (0..base.n()).flat_map(|i| base.outcome_row(i).to_vec()).collect();
    // Subject 2 duplicates subject 0.
    cont[2] = cont[0];
    out[4] = out[0];
    out[5] = out[1];
    let mut disc = disc;
    disc[2] = disc[0];
    let data = ProfileData::from_parts(1, vec![2], 2, cont.clone(), disc, out.clone()).unwrap();
    let dist = |i: usize, j: usize| {
        (cont[i] - cont[j]).powi(2) + (out[2 * i] - out[2 * j]).powi(2) + (out[2 * i + 1] - out[2 * j + 1]).powi(2)
    };
    let (mut far_i, mut far_j) = (0, 1);
    for i in 0..data.n() {
        for j in i + 1..data.n() {
            if dist(i, j) > dist(far_i, far_j) {
                (far_i, far_j) = (i, j);
            }
        }
    }
    let prior = PriorSpec::default_for(&data).unwrap();
    let cfg = ChainConfig {
        iterations: 400,
        burn_in: 100,
        seed: 31,
        ..ChainConfig::default()
    };
    let s = run_chain(&data, &prior, &cfg).unwrap().scores.similarity().unwrap();
    assert!(s.get(0, 2) >= s.get(far_i, far_j), "identical {} vs distant {}", s.get(0, 2), s.get(far_i, far_j));
    assert_eq!(s.get(far_i, far_i), 1.0);
}

#[test]
fn deselected_covariates_contribute_equally_to_every_component() {
    // Discrete covariates only: a deselected continuous covariate keeps its
    // cluster-specific covariance, so only its mean falls back to x̄.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 20;
    let disc: Vec<u32> = (0..2 * n).map(|_| rng.random_range(1..=3)).collect();
    let out: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    let data = ProfileData::from_parts(0, vec![3, 3], 2, vec![], disc, out).unwrap();
    let prior = PriorSpec::default_for(&data).unwrap();
    let mut state = ChainState::initialize(&data, &prior, true, 4, 7).unwrap();
    for c in state.clusters.iter_mut() {
        c.gamma.iter_mut().for_each(|g| *g = false);
    }
    for i in 0..data.n() {
        let dens = subject_log_densities(&mut state, &data, i);
        assert!(dens.len() >= 2);
        for d in &dens[1..] {
            assert!((d.covariates - dens[0].covariates).abs() < 1e-12);
        }
    }
}

#[test]
fn outcome_density_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let k = 3;
        let a = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() - 0.5);
        let cov = &a * a.transpose() + DMatrix::identity(k, k) * 0.1;
        let mean: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let diff = DVector::from_iterator(k, y.iter().zip(&mean).map(|(a, b)| a - b));
        let lu = cov.clone().lu();
        let quad = diff.dot(&lu.solve(&diff).unwrap());
        let want = -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + lu.determinant().ln() + quad);
        let got = log_density_outcome(&y, &mean, &cov, 0).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn observer_sees_every_retained_iteration() {
    let data = checks::two_group_data(20, 1);
    let prior = PriorSpec::default_for(&data).unwrap();
    let cfg = ChainConfig {
        iterations: 50,
        burn_in: 10,
        seed: 1,
        ..ChainConfig::default()
    };
    let mut seen = Vec::new();
    let out = run_chain_observed(&data, &prior, &cfg, |_, r| seen.push(r.iteration)).unwrap();
    assert_eq!(seen.len(), 40);
    assert_eq!(out.trace.iter().map(|r| r.iteration).collect::<Vec<_>>(), seen);
}

/// With variable selection on and discrete covariates only, the switches γ
/// sum out in closed form and ρ integrates against its atom-plus-Beta prior;
/// partition frequencies and E[ρ | data] match that enumeration.
#[test]
fn selection_partition_frequencies_match_exact_posterior() {
    let y = [0.0, 0.2, 2.6, 2.8];
    let d = [1u32, 1, 2, 2, 2, 3, 1, 3];
    let categories = vec![2, 3];
    let (m0, kappa, lambda, nu) = (1.4, 0.5, 1.0, 3.0);
    let data = ProfileData::from_parts(0, categories.clone(), 1, vec![], d.to_vec(), y.to_vec()).unwrap();
    let prior = PriorSpec {
        covariates: None,
        outcome: NiwParams {
            mean: DVector::from_element(1, m0),
            kappa,
            scale: DMatrix::from_element(1, 1, lambda),
            dof: nu,
        },
        dirichlet: categories.iter().map(|&k| vec![1.0; k]).collect(),
        alpha: GammaPrior { shape: 2.0, rate: 1.0 },
        selection: SelectionPrior::default(),
    };
    let reference = data.reference().proportions.clone();
    let n = y.len();
    let p2 = categories.len();
    let log_alpha_factor = |k: usize| {
        log_integral(
            |t| {
                let a = t.exp();
                a.ln() - a + k as f64 * t + ln_gamma(a) - ln_gamma(a + n as f64) + t
            },
            -30.0,
            8.0,
            40_000,
        )
    };
    // Per covariate j and partition: (log DirMult_c, log reference mass_c) per cluster.
    let partitions = set_partitions(n);
    let mut weights = Vec::new();
    let mut rho_weights = Vec::new();
    for p in &partitions {
        let k = *p.iter().max().unwrap() as usize + 1;
        let mut base = log_alpha_factor(k);
        let mut blocks = vec![Vec::new(); p2];
        for c in 0..k as u32 {
            let members: Vec<usize> = (0..n).filter(|&i| p[i] == c).collect();
            let ys: Vec<f64> = members.iter().map(|&i| y[i]).collect();
            base += ln_gamma(members.len() as f64) + niw_1d_log_marginal_sequential(&ys, m0, kappa, lambda, nu);
            for j in 0..p2 {
                let codes: Vec<usize> = members.iter().map(|&i| d[i * p2 + j] as usize - 1).collect();
                let on = dirichlet_sequential(&prior.dirichlet[j], &codes);
                let off: f64 = codes.iter().map(|&c| reference[j][c].ln()).sum();
                blocks[j].push((on, off));
            }
        }
        // Π_j Π_c [ρ_j e^on + (1 − ρ_j) e^off], ρ_j ~ ½δ₀ + ½Beta(½, ½) independently.
        let mut w = base.exp();
        let mut rho_means = Vec::new();
        for blocks_j in &blocks {
            let f = |rho: f64| blocks_j.iter().map(|(on, off)| rho * on.exp() + (1.0 - rho) * off.exp()).product::<f64>();
            let half_pi = std::f64::consts::FRAC_PI_2;
            let slab = trapezoid(|t| f(t.sin().powi(2)) / half_pi, 0.0, half_pi, 20_000);
            let slab_rho = trapezoid(|t| t.sin().powi(2) * f(t.sin().powi(2)) / half_pi, 0.0, half_pi, 20_000);
            let marginal = 0.5 * f(0.0) + 0.5 * slab;
            w *= marginal;
            rho_means.push(0.5 * slab_rho / marginal);
        }
        weights.push(w);
        rho_weights.push(rho_means);
    }
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let exact_rho: Vec<f64> = (0..p2).map(|j| exact.iter().zip(&rho_weights).map(|(w, r)| w * r[j]).sum()).collect();

    let cfg = ChainConfig {
        iterations: 62_000,
        burn_in: 2_000,
        seed: 41,
        initial_clusters: 2,
        variable_selection: true,
    };
    let out = run_chain(&data, &prior, &cfg).unwrap();
    let mut freq: HashMap<Vec<u32>, f64> = HashMap::new();
    for r in &out.trace {
        *freq.entry(canonical(&r.allocation)).or_default() += 1.0 / out.trace.len() as f64;
    }
    let mut worst: f64 = 0.0;
    for (p, &want) in partitions.iter().zip(&exact) {
        let got = freq.get(p).copied().unwrap_or(0.0);
        println!("{p:?}: sampled {got:.4} exact {want:.4}");
        worst = worst.max((got - want).abs());
    }
    let rho = out.mean_rho();
    println!("E[rho]: sampled {rho:?} exact {exact_rho:?}");
    assert!(worst < 0.02, "largest partition-probability error {worst}");
    for (got, want) in rho.iter().zip(&exact_rho) {
        assert!((got - want).abs() < 0.03, "E[rho] {got} vs {want}");
    }
}
