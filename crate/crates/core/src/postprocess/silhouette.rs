use crate::error::{Error, Result};

/// Mean silhouette width; subjects in singleton clusters score 0.
pub fn average_silhouette(d: &[f64], n: usize, labels: &[u32]) -> Result<f64> {
    if labels.len() != n || d.len() != n * n {
        return Err(Error::Dimension("labels and dissimilarity sizes disagree".into()));
    }
    let k = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut sizes = vec![0usize; k + 1];
    for &l in labels {
        sizes[l as usize] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Data("silhouette needs at least two clusters".into()));
    }
    let mut sums = vec![0.0; k + 1];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[labels[j] as usize] += d[i * n + j];
        }
        let own = labels[i] as usize;
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..=k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}
