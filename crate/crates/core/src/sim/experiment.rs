use std::path::Path;

use serde::Serialize;

use super::scenarios::{scenario_by_id, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::pipeline::{run_pipeline, PipelineOutput, PipelineSettings};
use crate::rng::{derive, DATA, REPLICATE};

/// Seed of replicate `r`; its data and fitting seeds derive from it.
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    derive(base, REPLICATE, r as u64)
}

pub fn replicate_data_seed(base: u64, r: usize) -> u64 {
    derive(replicate_seed(base, r), DATA, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub ari: f64,
    pub completeness: f64,
    pub homogeneity: f64,
    pub n_cluster: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

/// One cell of a results table: mean (SD) of every metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentAggregate {
    pub scenario: u8,
    pub n: usize,
    pub sigma_y: f64,
    pub sigma_x: f64,
    pub rho_x: f64,
    pub noise_covariates: usize,
    pub replicates: usize,
    pub failed: usize,
    pub ari: MeanSd,
    pub completeness: MeanSd,
    pub homogeneity: MeanSd,
    pub n_cluster: MeanSd,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ReplicateRow>,
    /// (replicate, error message) of failed replicates.
    pub errors: Vec<(usize, String)>,
    pub aggregate: Option<ExperimentAggregate>,
}

/// Simulates and fits every replicate, calling `inspect` with each
/// successful replicate's truth and pipeline output.
pub fn run_experiment_with(
    cfg: &ScenarioConfig,
    settings: &PipelineSettings,
    mut inspect: impl FnMut(usize, &super::LabeledDataset, &PipelineOutput),
) -> Result<ExperimentResult> {
    cfg.validate()?;
    settings.validate()?;
    let scenario = scenario_by_id(cfg.scenario)?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in 0..cfg.replicates {
        let outcome = scenario
            .generate(cfg, replicate_data_seed(cfg.seed, r))
            .and_then(|truth| {
                let out = run_pipeline(&truth.dataset, settings, replicate_seed(cfg.seed, r))?;
                let m = MetricsReport::compute(&truth.labels, &out.stage2.representative.labels)?;
                inspect(r, &truth, &out);
                Ok(ReplicateRow {
                    replicate: r + 1,
                    ari: m.ari,
                    completeness: m.completeness,
                    homogeneity: m.homogeneity,
                    n_cluster: out.stage2.representative.k,
                })
            });
        match outcome {
            Ok(row) => {
                log::info!(
                    "replicate {}: ari {:.3}, homogeneity {:.3}, completeness {:.3}, clusters {}",
                    row.replicate,
                    row.ari,
                    row.homogeneity,
                    row.completeness,
                    row.n_cluster
                );
                rows.push(row);
            }
            Err(e) => {
                log::warn!("replicate {} failed: {e}", r + 1);
                errors.push((r + 1, e.to_string()));
            }
        }
    }
    let aggregate = (!rows.is_empty()).then(|| {
        let col = |f: fn(&ReplicateRow) -> f64| MeanSd::of(&rows.iter().map(f).collect::<Vec<_>>());
        ExperimentAggregate {
            scenario: cfg.scenario,
            n: cfg.n,
            sigma_y: cfg.sigma_y,
            sigma_x: cfg.sigma_x,
            rho_x: cfg.rho_x,
            noise_covariates: cfg.noise_covariates,
            replicates: cfg.replicates,
            failed: errors.len(),
            ari: col(|r| r.ari),
            completeness: col(|r| r.completeness),
            homogeneity: col(|r| r.homogeneity),
            n_cluster: col(|r| r.n_cluster as f64),
        }
    });
    Ok(ExperimentResult {
        rows,
        errors,
        aggregate,
    })
}

pub fn run_experiment(cfg: &ScenarioConfig, settings: &PipelineSettings) -> Result<ExperimentResult> {
    run_experiment_with(cfg, settings, |_, _, _| {})
}

impl ExperimentResult {
    /// Writes `replicates.csv`, `aggregate.json` and, when any replicate
    /// failed, `errors.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("replicates.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["replicate", "ari", "completeness", "homogeneity", "n_cluster"])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        if !self.errors.is_empty() {
            let path = dir.join("errors.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["replicate", "error"])?;
            for (r, msg) in &self.errors {
                w.write_record([r.to_string(), msg.clone()])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("aggregate.json");
        let text = serde_json::to_string_pretty(&self.aggregate)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.sd, 1.0);
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
    }

    #[test]
    fn replicate_seeds_distinct() {
        assert_ne!(replicate_seed(1, 0), replicate_seed(1, 1));
        assert_ne!(replicate_seed(1, 0), replicate_data_seed(1, 0));
    }
}
