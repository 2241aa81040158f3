use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::ProfileData;
use super::prior::PriorSpec;
use super::state::{ChainState, TraceRecord};
use super::sweep::gibbs_sweep;
use crate::error::{Error, Result};
use crate::postprocess::ScoreAccumulator;

/// Settings of one mixture chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Components the subjects are randomly spread over at the start.
    pub initial_clusters: usize,
    pub variable_selection: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 2000,
            burn_in: 1000,
            seed: 0,
            initial_clusters: 10,
            variable_selection: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "mixture iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.initial_clusters == 0 {
            return Err(Error::Config("initial cluster count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in
    }
}

/// Retained iterations and the running co-clustering counts.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub trace: Vec<TraceRecord>,
    pub scores: ScoreAccumulator,
    pub final_state: ChainState,
    /// Proportion of accepted α proposals after burn-in.
    pub alpha_acceptance: f64,
}

impl ChainOutput {
    /// Posterior mean of ρ_j per covariate.
    pub fn mean_rho(&self) -> Vec<f64> {
        let p = self.trace.first().map_or(0, |r| r.rho.len());
        let mut out = vec![0.0; p];
        for r in &self.trace {
            for (o, v) in out.iter_mut().zip(&r.rho) {
                *o += v;
            }
        }
        out.iter().map(|v| v / self.trace.len() as f64).collect()
    }
}

pub fn run_chain(data: &ProfileData, prior: &PriorSpec, cfg: &ChainConfig) -> Result<ChainOutput> {
    run_chain_observed(data, prior, cfg, |_, _| {})
}

/// As [`run_chain`], calling `observer` after every retained sweep.
pub fn run_chain_observed(
    data: &ProfileData,
    prior: &PriorSpec,
    cfg: &ChainConfig,
    mut observer: impl FnMut(&ChainState, &TraceRecord),
) -> Result<ChainOutput> {
    cfg.validate()?;
    prior.validate(data)?;
    let mut state = ChainState::initialize(data, prior, cfg.variable_selection, cfg.initial_clusters, cfg.seed)?;
    let mut trace = Vec::with_capacity(cfg.retained());
    let mut scores = ScoreAccumulator::new(data.n());
    let mut accepts_at_burn_in = 0;
    for it in 0..cfg.iterations {
        state.adapt = it < cfg.burn_in;
        if it == cfg.burn_in {
            accepts_at_burn_in = state.alpha_accepts;
        }
        gibbs_sweep(&mut state, data, prior)?;
        if it >= cfg.burn_in {
            let record = TraceRecord::from_state(&state);
            scores.add(&record.allocation)?;
            observer(&state, &record);
            trace.push(record);
        }
    }
    if state.numerical_warnings > 0 {
        log::warn!("{} covariance draws were rejected and retained", state.numerical_warnings);
    }
    let alpha_acceptance = (state.alpha_accepts - accepts_at_burn_in) as f64 / cfg.retained() as f64;
    Ok(ChainOutput {
        trace,
        scores,
        final_state: state,
        alpha_acceptance,
    })
}

/// Writes one row per retained iteration: iteration, α, occupied cluster
/// count, ρ per covariate, then every subject's cluster label.
pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRecord], data: &ProfileData) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string(), "alpha".into(), "n_clusters".into()];
    header.extend(data.covariate_names().iter().map(|n| format!("rho_{n}")));
    header.extend(data.ids.iter().map(|id| format!("z_{id}")));
    w.write_record(&header)?;
    for r in trace {
        let mut row = vec![r.iteration.to_string(), r.alpha.to_string(), r.n_clusters().to_string()];
        row.extend(r.rho.iter().map(|v| v.to_string()));
        row.extend(r.allocation.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// First line of a JSON Lines trace: what the records refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub ids: Vec<String>,
    /// Names of the per-cluster parameters, in profile-summary order.
    pub parameters: Vec<String>,
    pub covariates: Vec<String>,
    pub arms: usize,
}

/// Full retained trace as JSON Lines: the header, then one record per line.
/// Unlike the CSV views this round-trips through [`read_trace_jsonl`].
pub fn write_trace_jsonl(path: impl AsRef<Path>, header: &TraceHeader, trace: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for r in trace {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_jsonl(path: impl AsRef<Path>) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    use std::io::BufRead;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty trace file", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: TraceHeader = serde_json::from_str(&first)?;
    let mut trace = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)?;
        if record.allocation.len() != header.ids.len() {
            return Err(Error::Dimension(format!(
                "{}: iteration {} allocates {} subjects, header lists {}",
                path.display(),
                record.iteration,
                record.allocation.len(),
                header.ids.len()
            )));
        }
        trace.push(record);
    }
    Ok((header, trace))
}

/// Writes the per-cluster parameters of every retained iteration, one row
/// per (iteration, cluster).
pub fn write_cluster_params(path: impl AsRef<Path>, trace: &[TraceRecord], data: &ProfileData) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["iteration".to_string(), "cluster".into(), "size".into()];
    header.extend(data.continuous_names.iter().map(|n| format!("mean_{n}")));
    for e in &data.encodings {
        header.extend(e.levels.iter().map(|l| format!("prob_{}_{l}", e.covariate)));
    }
    header.extend((1..=data.arms()).map(|a| format!("yhat_arm_{a}")));
    header.extend(data.covariate_names().iter().map(|n| format!("gamma_{n}")));
    w.write_record(&header)?;
    for r in trace {
        for (k, c) in r.clusters.iter().enumerate() {
            let mut row = vec![r.iteration.to_string(), (k + 1).to_string(), c.size.to_string()];
            row.extend(c.cont_mean.iter().map(|v| v.to_string()));
            for probs in &c.disc_probs {
                row.extend(probs.iter().map(|v| v.to_string()));
            }
            row.extend(c.out_mean.iter().map(|v| v.to_string()));
            row.extend(c.gamma.iter().map(|&g| (g as u8).to_string()));
            w.write_record(&row)?;
        }
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
