use std::path::Path;

use serde::Serialize;

use super::pam::pam_partition;
use super::silhouette::average_silhouette;
use super::similarity::SimilarityMatrix;
use crate::error::{Error, Result};

/// Silhouette widths closer than this are considered tied.
const ASW_TIE: f64 = 1e-12;

/// Below this average silhouette width the chosen partition is reported as weak.
pub const WEAK_STRUCTURE_ASW: f64 = 0.2;

/// Single partition summarising the posterior over partitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentativeClustering {
    /// 1-based labels, contiguous.
    pub labels: Vec<u32>,
    pub k: usize,
    pub silhouette: f64,
    pub medoids: Vec<usize>,
    /// (k, average silhouette width) of every candidate examined.
    pub candidates: Vec<(usize, f64)>,
}

/// Default largest cluster count examined: min(10, ⌊n/10⌋), at least 2.
pub fn default_k_max(n: usize) -> usize {
    (n / 10).min(10).max(2)
}

/// Runs PAM on 1 − S for k = 2..=k_max and keeps the partition with the
/// largest average silhouette width, preferring the smaller k on ties.
pub fn select_representative(s: &SimilarityMatrix, k_max: usize) -> Result<RepresentativeClustering> {
    if k_max < 2 {
        return Err(Error::Config(format!("k_max must be at least 2, got {k_max}")));
    }
    let n = s.n();
    if n < 2 {
        return Err(Error::Data("representative clustering needs at least two subjects".into()));
    }
    let d = s.dissimilarity();
    let mut best: Option<RepresentativeClustering> = None;
    let mut candidates = Vec::new();
    for k in 2..=k_max.min(n) {
        let pam = pam_partition(&d, n, k)?;
        let asw = average_silhouette(&d, n, &pam.labels)?;
        candidates.push((k, asw));
        if best.as_ref().is_none_or(|b| asw > b.silhouette + ASW_TIE) {
            best = Some(RepresentativeClustering {
                labels: pam.labels,
                k,
                silhouette: asw,
                medoids: pam.medoids,
                candidates: Vec::new(),
            });
        }
    }
    let mut best = best.expect("at least one candidate");
    best.candidates = candidates;
    if best.silhouette < WEAK_STRUCTURE_ASW {
        log::warn!(
            "weak clustering structure: average silhouette width {:.3} at k = {}",
            best.silhouette,
            best.k
        );
    }
    Ok(best)
}

impl RepresentativeClustering {
    /// CSV with columns `id,cluster`.
    pub fn write(&self, path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "cluster"])?;
        for (id, l) in ids.iter().zip(&self.labels) {
            w.write_record([id.as_str(), &l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads an `id,<label>` CSV (any header names) and returns ids and labels.
pub fn read_labels(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<String>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Data(format!(
                "{}: row {} needs an id and a label",
                path.display(),
                row + 1
            )));
        }
        ids.push(rec[0].to_string());
        labels.push(rec[1].to_string());
    }
    Ok((ids, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(sizes: &[usize]) -> SimilarityMatrix {
        let labels: Vec<u32> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b as u32, s))
            .collect();
        let n = labels.len();
        let values = (0..n * n)
            .map(|x| if labels[x / n] == labels[x % n] { 1.0 } else { 0.0 })
            .collect();
        SimilarityMatrix::from_dense(n, values, 1).unwrap()
    }

    #[test]
    fn two_blocks_recovered() {
        let r = select_representative(&blocks(&[4, 6]), 5).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.labels, vec![1, 1, 1, 1, 2, 2, 2, 2, 2, 2]);
        assert!(r.silhouette > 0.99);
    }

    #[test]
    fn k_max_honoured() {
        let r = select_representative(&blocks(&[3, 3, 3, 3, 3]), 3).unwrap();
        assert!(r.k <= 3);
        assert_eq!(r.candidates.len(), 2);
    }

    #[test]
    fn defaults() {
        assert_eq!(default_k_max(450), 10);
        assert_eq!(default_k_max(45), 4);
        assert_eq!(default_k_max(5), 2);
    }
}
