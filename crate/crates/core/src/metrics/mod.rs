//! External clustering-validation metrics: adjusted Rand index,
//! homogeneity and completeness (natural-log entropies).

use std::collections::HashMap;
use std::hash::Hash;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Contingency counts of two labelings: `cells[(r, c)]`, row and column totals.
struct Contingency {
    n: usize,
    cells: Vec<usize>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn relabel<T: Eq + Hash + Clone>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let codes = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l.clone()).or_insert(next)
        })
        .collect();
    (codes, map.len())
}

fn contingency<T: Eq + Hash + Clone, U: Eq + Hash + Clone>(truth: &[T], pred: &[U]) -> Result<Contingency> {
    if truth.len() != pred.len() {
        return Err(Error::Data(format!(
            "partitions have different lengths ({} and {})",
            truth.len(),
            pred.len()
        )));
    }
    let (t, kt) = relabel(truth);
    let (p, kp) = relabel(pred);
    let mut cells = vec![0usize; kt * kp];
    let mut rows = vec![0usize; kt];
    let mut cols = vec![0usize; kp];
    for (&a, &b) in t.iter().zip(&p) {
        cells[a * kp + b] += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    Ok(Contingency {
        n: truth.len(),
        cells,
        rows,
        cols,
    })
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. When both partitions are trivial in the same way
/// (expected index equals its maximum) the value is 1.
pub fn adjusted_rand_index<T: Eq + Hash + Clone, U: Eq + Hash + Clone>(truth: &[T], pred: &[U]) -> Result<f64> {
    if truth.len() < 2 {
        return Err(Error::Data("adjusted Rand index needs at least two subjects".into()));
    }
    let t = contingency(truth, pred)?;
    let index: f64 = t.cells.iter().map(|&c| pairs(c)).sum();
    let a: f64 = t.rows.iter().map(|&c| pairs(c)).sum();
    let b: f64 = t.cols.iter().map(|&c| pairs(c)).sum();
    let expected = a * b / pairs(t.n);
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// H(rows | cols) from a contingency table.
fn conditional_entropy(t: &Contingency, rows_given_cols: bool) -> f64 {
    let n = t.n as f64;
    let kc = t.cols.len();
    let mut h = 0.0;
    for (idx, &c) in t.cells.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let given = if rows_given_cols { t.cols[idx % kc] } else { t.rows[idx / kc] };
        h -= c as f64 / n * (c as f64 / given as f64).ln();
    }
    h
}

/// 1 − H(C|K)/H(C): every predicted cluster holds a single true class.
/// Equals 1 when the truth has a single class.
pub fn homogeneity<T: Eq + Hash + Clone, U: Eq + Hash + Clone>(truth: &[T], pred: &[U]) -> Result<f64> {
    let t = contingency(truth, pred)?;
    let h_c = entropy(&t.rows, t.n);
    if h_c == 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - conditional_entropy(&t, true) / h_c).clamp(0.0, 1.0))
}

/// 1 − H(K|C)/H(K): every true class falls in a single predicted cluster.
/// Equals 1 when the prediction has a single cluster.
pub fn completeness<T: Eq + Hash + Clone, U: Eq + Hash + Clone>(truth: &[T], pred: &[U]) -> Result<f64> {
    let t = contingency(truth, pred)?;
    let h_k = entropy(&t.cols, t.n);
    if h_k == 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - conditional_entropy(&t, false) / h_k).clamp(0.0, 1.0))
}

/// A label-permutation-invariant comparison of a predicted partition with the truth.
pub trait ClusteringMetric: Send + Sync {
    fn name(&self) -> &'static str;
    fn compute(&self, truth: &[u32], pred: &[u32]) -> Result<f64>;
}

struct Ari;
struct Homogeneity;
struct Completeness;

impl ClusteringMetric for Ari {
    fn name(&self) -> &'static str {
        "ari"
    }
    fn compute(&self, truth: &[u32], pred: &[u32]) -> Result<f64> {
        adjusted_rand_index(truth, pred)
    }
}

impl ClusteringMetric for Homogeneity {
    fn name(&self) -> &'static str {
        "homogeneity"
    }
    fn compute(&self, truth: &[u32], pred: &[u32]) -> Result<f64> {
        homogeneity(truth, pred)
    }
}

impl ClusteringMetric for Completeness {
    fn name(&self) -> &'static str {
        "completeness"
    }
    fn compute(&self, truth: &[u32], pred: &[u32]) -> Result<f64> {
        completeness(truth, pred)
    }
}

/// Every available metric, in report order.
pub fn metric_registry() -> Vec<Box<dyn ClusteringMetric>> {
    vec![Box::new(Ari), Box::new(Homogeneity), Box::new(Completeness)]
}

pub fn metric_by_name(name: &str) -> Option<Box<dyn ClusteringMetric>> {
    metric_registry().into_iter().find(|m| m.name() == name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ari: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub n_clusters_pred: usize,
    pub n_clusters_true: usize,
}

impl MetricsReport {
    pub fn compute<T: Eq + Hash + Clone, U: Eq + Hash + Clone>(truth: &[T], pred: &[U]) -> Result<Self> {
        Ok(MetricsReport {
            ari: adjusted_rand_index(truth, pred)?,
            homogeneity: homogeneity(truth, pred)?,
            completeness: completeness(truth, pred)?,
            n_clusters_pred: relabel(pred).1,
            n_clusters_true: relabel(truth).1,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture() {
        let t = [0, 0, 1, 1];
        let p = [0, 0, 1, 2];
        assert!((adjusted_rand_index(&t, &p).unwrap() - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(homogeneity(&t, &p).unwrap(), 1.0);
        // H(K) = -(1/2 ln 1/2 + 2 · 1/4 ln 1/4), H(K|C) = ln 2 / 2
        let hk = 1.5 * 2f64.ln();
        let c = 1.0 - 0.5 * 2f64.ln() / hk;
        assert!((completeness(&t, &p).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn identity_and_relabeling() {
        let t = [1, 1, 2, 3, 3, 3];
        assert_eq!(adjusted_rand_index(&t, &t).unwrap(), 1.0);
        let r = ["c", "c", "a", "b", "b", "b"];
        assert!((adjusted_rand_index(&t, &r).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(homogeneity(&t, &r).unwrap(), 1.0);
        assert_eq!(completeness(&t, &r).unwrap(), 1.0);
    }

    #[test]
    fn one_predicted_cluster() {
        let t = [1, 1, 2, 2];
        let p = [5, 5, 5, 5];
        assert_eq!(homogeneity(&t, &p).unwrap(), 0.0);
        assert_eq!(completeness(&t, &p).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(adjusted_rand_index(&[1, 2], &[1]).is_err());
        assert!(homogeneity(&[1, 2], &[1]).is_err());
        assert!(completeness(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn registry_names() {
        let names: Vec<_> = metric_registry().iter().map(|m| m.name()).collect();
        assert_eq!(names, ["ari", "homogeneity", "completeness"]);
        assert!(metric_by_name("ari").is_some());
        assert!(metric_by_name("nmi").is_none());
    }
}
