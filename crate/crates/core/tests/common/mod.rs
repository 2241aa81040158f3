//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

/// Every set partition of `n` items as a restricted-growth label string.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn extend(prefix: &mut Vec<u32>, n: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for label in 0..=next {
            prefix.push(label);
            extend(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        extend(&mut Vec::new(), n, &mut out);
    }
    out
}

/// Relabels by order of first appearance, so equal partitions compare equal.
pub fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index by explicit pair enumeration.
pub fn ari_oracle(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            in_a += sa as u8 as f64;
            in_b += sb as u8 as f64;
            both += (sa && sb) as u8 as f64;
        }
    }
    let pairs = choose2(n as f64);
    let expected = in_a * in_b / pairs;
    let max = 0.5 * (in_a + in_b);
    if (max - expected).abs() == 0.0 {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Conditional entropy H(X | Y) and entropy H(X) by explicit summation.
fn entropies(x: &[u32], y: &[u32]) -> (f64, f64) {
    let n = x.len() as f64;
    let mut hx = 0.0;
    let mut hxy = 0.0;
    let xs: Vec<u32> = {
        let mut v = x.to_vec();
        v.sort();
        v.dedup();
        v
    };
    let ys: Vec<u32> = {
        let mut v = y.to_vec();
        v.sort();
        v.dedup();
        v
    };
    for &cx in &xs {
        let nx = x.iter().filter(|&&v| v == cx).count() as f64;
        hx -= nx / n * (nx / n).ln();
    }
    for &cy in &ys {
        let ny = y.iter().filter(|&&v| v == cy).count() as f64;
        for &cx in &xs {
            let nxy = x.iter().zip(y).filter(|(&a, &b)| a == cx && b == cy).count() as f64;
            if nxy > 0.0 {
                hxy -= nxy / n * (nxy / ny).ln();
            }
        }
    }
    (hxy, hx)
}

/// Homogeneity 1 − H(truth | pred) / H(truth), 1 when H(truth) = 0.
pub fn homogeneity_oracle(truth: &[u32], pred: &[u32]) -> f64 {
    let (hcond, h) = entropies(truth, pred);
    if h == 0.0 {
        1.0
    } else {
        1.0 - hcond / h
    }
}

pub fn completeness_oracle(truth: &[u32], pred: &[u32]) -> f64 {
    homogeneity_oracle(pred, truth)
}

/// Minimum k-medoids cost over every k-subset of medoids.
pub fn exhaustive_kmedoids_cost(d: &[f64], n: usize, k: usize) -> f64 {
    fn rec(d: &[f64], n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            let cost: f64 = (0..n)
                .map(|i| chosen.iter().map(|&m| d[i * n + m]).fold(f64::INFINITY, f64::min))
                .sum();
            *best = best.min(cost);
            return;
        }
        for m in start..n {
            chosen.push(m);
            rec(d, n, k, m + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(d, n, k, 0, &mut Vec::new(), &mut best);
    best
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let mut s = 0.5 * (f(lo) + f(hi));
    for i in 1..steps {
        s += f(lo + i as f64 * h);
    }
    s * h
}

/// log ∫ exp(g(t)) dt by the trapezoid rule, shifting by the grid maximum.
pub fn log_integral(g: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let values: Vec<f64> = (0..=steps).map(|i| g(lo + i as f64 * h)).collect();
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (i, v) in values.iter().enumerate() {
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        s += w * (v - peak).exp();
    }
    peak + (s * h).ln()
}

/// log p(x) for 1-d data under μ | σ² ~ N(m0, σ²/κ), σ² ~ IW(λ, ν) (an
/// inverse gamma with shape ν/2 and scale λ/2), integrating σ² numerically
/// on the log scale after the Gaussian integral over μ.
pub fn niw_1d_log_marginal_numeric(x: &[f64], m0: f64, kappa: f64, lambda: f64, nu: f64) -> f64 {
    let n = x.len() as f64;
    let mean = if x.is_empty() { 0.0 } else { x.iter().sum::<f64>() / n };
    let scatter: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let shrink = if x.is_empty() { 0.0 } else { n * kappa / (kappa + n) * (mean - m0).powi(2) };
    let log_ig_norm = 0.5 * nu * (0.5 * lambda).ln() - ln_gamma(0.5 * nu);
    let g = |t: f64| {
        let s2 = t.exp();
        let inner = -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() + 0.5 * (kappa / (kappa + n)).ln()
            - (scatter + shrink) / (2.0 * s2);
        let prior = log_ig_norm - (0.5 * nu + 1.0) * t - 0.5 * lambda / s2;
        inner + prior + t
    };
    log_integral(g, -40.0, 40.0, 80_000)
}

/// log p(x) for 1-d data under the same prior, as the product of
/// sequential Student-t predictive densities.
pub fn niw_1d_log_marginal_sequential(x: &[f64], m0: f64, kappa: f64, lambda: f64, nu: f64) -> f64 {
    let (mut m, mut k, mut l, mut v) = (m0, kappa, lambda, nu);
    let mut out = 0.0;
    for &xi in x {
        let scale2 = l * (k + 1.0) / (k * v);
        let z2 = (xi - m).powi(2) / scale2;
        out += ln_gamma(0.5 * (v + 1.0)) - ln_gamma(0.5 * v) - 0.5 * (v * std::f64::consts::PI * scale2).ln()
            - 0.5 * (v + 1.0) * (z2 / v).ln_1p();
        let m_new = (k * m + xi) / (k + 1.0);
        l += k / (k + 1.0) * (xi - m).powi(2);
        m = m_new;
        k += 1.0;
        v += 1.0;
    }
    out
}

/// log p(counts) for a two-category sequence under Beta(a1, a2), integrating
/// the success probability numerically on the logit scale.
pub fn beta_binomial_log_numeric(a1: f64, a2: f64, n1: usize, n2: usize) -> f64 {
    let log_beta = ln_gamma(a1) + ln_gamma(a2) - ln_gamma(a1 + a2);
    let g = |s: f64| {
        // p = logistic(s), dp = p(1−p) ds
        let lp = -(-s).exp().ln_1p();
        let lq = -s.exp().ln_1p();
        (a1 + n1 as f64) * lp + (a2 + n2 as f64) * lq - log_beta
    };
    log_integral(g, -60.0, 60.0, 120_000)
}

/// Sequential Dirichlet-multinomial predictive product for a code sequence.
pub fn dirichlet_sequential(a: &[f64], codes: &[usize]) -> f64 {
    let mut counts = vec![0.0; a.len()];
    let mut out = 0.0;
    for &c in codes {
        let total: f64 = a.iter().sum::<f64>() + counts.iter().sum::<f64>();
        out += ((a[c] + counts[c]) / total).ln();
        counts[c] += 1.0;
    }
    out
}

/// Batch-means Monte Carlo standard error of the mean of a correlated series.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
