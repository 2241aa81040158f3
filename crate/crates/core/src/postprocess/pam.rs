use serde::Serialize;

use crate::error::{Error, Result};

/// Result of k-medoids clustering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PamResult {
    /// 1-based labels; cluster `k` is the one around `medoids[k - 1]`.
    pub labels: Vec<u32>,
    /// Medoid indices in increasing order.
    pub medoids: Vec<usize>,
    /// Sum of dissimilarities to the nearest medoid.
    pub cost: f64,
}

/// Improvements smaller than this are treated as ties.
const TOLERANCE: f64 = 1e-12;

/// Partitioning around medoids (BUILD then SWAP to a local optimum) on a
/// row-major n×n dissimilarity matrix. Ties go to the lowest index.
pub fn pam_partition(d: &[f64], n: usize, k: usize) -> Result<PamResult> {
    if d.len() != n * n {
        return Err(Error::Dimension(format!("{} entries for a {n}x{n} dissimilarity", d.len())));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("cluster count {k} must lie in 1..={n}")));
    }
    let dist = |i: usize, j: usize| d[i * n + j];

    // BUILD
    let mut is_medoid = vec![false; n];
    let mut medoids = Vec::with_capacity(k);
    let first = (0..n)
        .map(|i| (i, (0..n).map(|j| dist(i, j)).sum::<f64>()))
        .fold((0, f64::INFINITY), |best, (i, c)| if c < best.1 - TOLERANCE { (i, c) } else { best });
    medoids.push(first.0);
    is_medoid[first.0] = true;
    let mut nearest: Vec<f64> = (0..n).map(|j| dist(first.0, j)).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in (0..n).filter(|&i| !is_medoid[i]) {
            let gain: f64 = (0..n).map(|j| (nearest[j] - dist(i, j)).max(0.0)).sum();
            if gain > best.1 + TOLERANCE {
                best = (i, gain);
            }
        }
        medoids.push(best.0);
        is_medoid[best.0] = true;
        for j in 0..n {
            nearest[j] = nearest[j].min(dist(best.0, j));
        }
    }

    // SWAP: apply the best improving exchange until none improves.
    loop {
        let (first_d, second_d, owner) = nearest_two(&dist, &medoids, n);
        let mut best = (0usize, 0usize, -TOLERANCE);
        for (mi, &m) in medoids.iter().enumerate() {
            for o in (0..n).filter(|&o| !is_medoid[o]) {
                let mut delta = 0.0;
                for j in 0..n {
                    let doj = dist(o, j);
                    delta += if owner[j] == m {
                        doj.min(second_d[j]) - first_d[j]
                    } else {
                        doj.min(first_d[j]) - first_d[j]
                    };
                }
                if delta < best.2 {
                    best = (mi, o, delta);
                }
            }
        }
        if best.2 >= -TOLERANCE {
            break;
        }
        let (mi, o, _) = best;
        is_medoid[medoids[mi]] = false;
        is_medoid[o] = true;
        medoids[mi] = o;
    }

    medoids.sort_unstable();
    let mut labels = vec![0u32; n];
    let mut cost = 0.0;
    for j in 0..n {
        if let Some(pos) = medoids.iter().position(|&m| m == j) {
            labels[j] = pos as u32 + 1;
            continue;
        }
        let (pos, dj) = medoids
            .iter()
            .enumerate()
            .map(|(p, &m)| (p, dist(m, j)))
            .fold((0, f64::INFINITY), |b, (p, v)| if v < b.1 { (p, v) } else { b });
        labels[j] = pos as u32 + 1;
        cost += dj;
    }
    Ok(PamResult { labels, medoids, cost })
}

/// Per point: distance to the nearest and second-nearest medoid, and the nearest medoid.
fn nearest_two(dist: &impl Fn(usize, usize) -> f64, medoids: &[usize], n: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut first = vec![f64::INFINITY; n];
    let mut second = vec![f64::INFINITY; n];
    let mut owner = vec![usize::MAX; n];
    for j in 0..n {
        for &m in medoids {
            let v = dist(m, j);
            if v < first[j] {
                second[j] = first[j];
                first[j] = v;
                owner[j] = m;
            } else if v < second[j] {
                second[j] = v;
            }
        }
    }
    (first, second, owner)
}
