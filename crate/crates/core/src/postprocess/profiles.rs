use std::path::Path;

use serde::Serialize;

use super::select::RepresentativeClustering;
use crate::error::{Error, Result};
use crate::profile::{ProfileData, TraceRecord};

/// Quantile levels reported for every parameter.
pub const PROFILE_QUANTILES: [f64; 7] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975];

/// Position of a cluster's 90% credible interval relative to the average
/// of the clusters' posterior means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileFlag {
    Above,
    Below,
    Overlapping,
}

impl ProfileFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileFlag::Above => "above",
            ProfileFlag::Below => "below",
            ProfileFlag::Overlapping => "overlapping",
        }
    }

    /// `lo`/`hi` are the 5% and 95% quantiles.
    pub fn classify(lo: f64, hi: f64, reference: f64) -> Self {
        if lo > reference {
            ProfileFlag::Above
        } else if hi < reference {
            ProfileFlag::Below
        } else {
            ProfileFlag::Overlapping
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    /// 1-based representative cluster.
    pub cluster: u32,
    pub parameter: String,
    pub quantiles: [f64; 7],
    pub mean: f64,
    pub flag: ProfileFlag,
}

/// Model-averaged summaries of every cluster parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterProfileSummary {
    pub parameters: Vec<String>,
    /// Cluster sizes of the representative clustering.
    pub sizes: Vec<usize>,
    /// Ordered by cluster, then parameter.
    pub entries: Vec<ProfileEntry>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Parameter names in the order of [`parameter_vector`].
pub fn parameter_names(data: &ProfileData) -> Vec<String> {
    let mut names: Vec<String> = data.continuous_names.iter().map(|n| format!("mean_{n}")).collect();
    for e in &data.encodings {
        names.extend(e.levels.iter().map(|l| format!("prob_{}_{l}", e.covariate)));
    }
    names.extend((1..=data.arms()).map(|a| format!("yhat_arm_{a}")));
    names
}

/// Flattens every iteration-cluster's parameters in the order of [`parameter_names`].
fn parameter_vector(c: &crate::profile::ClusterSnapshot) -> Vec<f64> {
    let mut v = c.cont_mean.clone();
    for p in &c.disc_probs {
        v.extend_from_slice(p);
    }
    v.extend_from_slice(&c.out_mean);
    v
}

/// For every iteration, each representative cluster takes the
/// member-weighted mean of the parameters of the iteration clusters its
/// members occupy; the per-iteration values are then summarised by
/// quantiles.
pub fn summarize_profiles(
    trace: &[TraceRecord],
    rep: &RepresentativeClustering,
    parameters: Vec<String>,
) -> Result<ClusterProfileSummary> {
    if trace.is_empty() {
        return Err(Error::Data("profile summaries need a non-empty trace".into()));
    }
    let k = rep.k;
    let p = parameters.len();
    let n = rep.labels.len();
    let mut sizes = vec![0usize; k];
    for &l in &rep.labels {
        sizes[l as usize - 1] += 1;
    }
    // values[cluster][parameter][iteration]
    let mut values = vec![vec![Vec::with_capacity(trace.len()); p]; k];
    for record in trace {
        if record.allocation.len() != n {
            return Err(Error::Dimension(format!(
                "trace iteration {} allocates {} subjects, clustering has {n}",
                record.iteration,
                record.allocation.len()
            )));
        }
        let params: Vec<Vec<f64>> = record.clusters.iter().map(parameter_vector).collect();
        if params.iter().any(|v| v.len() != p) {
            return Err(Error::Dimension("trace parameters do not match the parameter names".into()));
        }
        let mut overlap = vec![vec![0usize; record.clusters.len()]; k];
        for (i, &z) in record.allocation.iter().enumerate() {
            overlap[rep.labels[i] as usize - 1][z as usize - 1] += 1;
        }
        for r in 0..k {
            for (q, column) in values[r].iter_mut().enumerate() {
                let total: f64 = overlap[r]
                    .iter()
                    .zip(&params)
                    .filter(|(&m, _)| m > 0)
                    .map(|(&m, v)| m as f64 * v[q])
                    .sum();
                column.push(total / sizes[r] as f64);
            }
        }
    }
    let means: Vec<Vec<f64>> = values
        .iter()
        .map(|c| c.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect())
        .collect();
    let mut entries = Vec::with_capacity(k * p);
    for (r, cluster) in values.iter_mut().enumerate() {
        for (q, v) in cluster.iter_mut().enumerate() {
            v.sort_by(f64::total_cmp);
            let quantiles = PROFILE_QUANTILES.map(|level| quantile_sorted(v, level));
            let average = means.iter().map(|m| m[q]).sum::<f64>() / k as f64;
            entries.push(ProfileEntry {
                cluster: r as u32 + 1,
                parameter: parameters[q].clone(),
                quantiles,
                mean: means[r][q],
                flag: ProfileFlag::classify(quantiles[1], quantiles[5], average),
            });
        }
    }
    Ok(ClusterProfileSummary {
        parameters,
        sizes,
        entries,
    })
}

impl ClusterProfileSummary {
    pub fn entry(&self, cluster: u32, parameter: &str) -> Option<&ProfileEntry> {
        self.entries
            .iter()
            .find(|e| e.cluster == cluster && e.parameter == parameter)
    }

    /// Long format: cluster, parameter, quantile, value, flag.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["cluster", "parameter", "quantile", "value", "flag"])?;
        for e in &self.entries {
            for (level, value) in PROFILE_QUANTILES.iter().zip(&e.quantiles) {
                w.write_record([
                    e.cluster.to_string(),
                    e.parameter.clone(),
                    level.to_string(),
                    value.to_string(),
                    e.flag.as_str().to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
