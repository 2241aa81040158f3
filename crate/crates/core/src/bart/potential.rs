use std::path::Path;

use super::sampler::{fingerprint, EnsemblePosterior};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Posterior-mean potential outcome of every subject under every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeMatrix {
    ids: Vec<String>,
    arms: usize,
    /// n × arms, row-major.
    values: Vec<f64>,
}

impl PotentialOutcomeMatrix {
    pub fn new(ids: Vec<String>, arms: usize, values: Vec<f64>) -> Result<Self> {
        if arms == 0 || values.len() != ids.len() * arms {
            return Err(Error::Dimension(format!(
                "{} values for {} subjects and {arms} arms",
                values.len(),
                ids.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite potential outcome for subject {} arm {}",
                ids[pos / arms],
                pos % arms + 1
            )));
        }
        Ok(PotentialOutcomeMatrix { ids, arms, values })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.arms..(i + 1) * self.arms]
    }

    /// Entry for subject `i` (0-based) and arm `a` (1-based).
    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.values[i * self.arms + a - 1]
    }

    pub fn column(&self, a: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(a - 1).step_by(self.arms).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> Vec<String> {
        (1..=self.arms).map(|a| format!("yhat_arm_{a}")).collect()
    }

    /// CSV with header `id,yhat_arm_1,..,yhat_arm_K`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let headers = rdr.headers()?.clone();
        let arms = headers.len().saturating_sub(1);
        for (a, h) in headers.iter().skip(1).enumerate() {
            if h != format!("yhat_arm_{}", a + 1) {
                return Err(Error::Data(format!(
                    "{}: expected column yhat_arm_{}, found `{h}`",
                    path.display(),
                    a + 1
                )));
            }
        }
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            ids.push(rec.get(0).unwrap_or("").to_string());
            for a in 1..=arms {
                let cell = rec.get(a).unwrap_or("");
                values.push(cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: headers[a].to_string(),
                    value: cell.to_string(),
                })?);
            }
        }
        PotentialOutcomeMatrix::new(ids, arms, values)
    }
}

/// Posterior-mean prediction of every subject with the treatment forced to
/// each arm in turn.
///
/// For the training data this reads the counterfactual means accumulated
/// during sampling; other data need a posterior that kept its trees.
pub fn impute_potential_outcomes(post: &EnsemblePosterior, ds: &Dataset) -> Result<PotentialOutcomeMatrix> {
    if ds.arms() != post.arms {
        return Err(Error::Dimension(format!(
            "dataset declares {} arms, the fit has {}",
            ds.arms(),
            post.arms
        )));
    }
    if post.draws() == 0 {
        return Err(Error::Config("no posterior draws to average".into()));
    }
    if fingerprint(ds) == post.fingerprint {
        return PotentialOutcomeMatrix::new(ds.ids().to_vec(), post.arms, post.grid_mean.clone());
    }
    let mut values = Vec::with_capacity(ds.n() * post.arms);
    for i in 0..ds.n() {
        for a in 1..=post.arms {
            values.push(predict_subject(post, ds, i, a)?);
        }
    }
    PotentialOutcomeMatrix::new(ds.ids().to_vec(), post.arms, values)
}

/// Posterior-mean prediction for subject `i` with treatment forced to `arm`,
/// averaging the stored ensembles.
pub fn predict_subject(post: &EnsemblePosterior, ds: &Dataset, i: usize, arm: usize) -> Result<f64> {
    if arm < 1 || arm > post.arms {
        return Err(Error::Data(format!("arm {arm} outside 1..={}", post.arms)));
    }
    let states = post.states.as_ref().ok_or_else(|| {
        Error::Config("prediction on new data needs a fit with keep_trees enabled".into())
    })?;
    if post.is_degenerate() {
        return Ok(post.scaling.min);
    }
    let row = post.design.row(ds, i, arm);
    let total: f64 = states
        .iter()
        .map(|s| s.predict(&row, &post.design, &post.scaling))
        .sum();
    Ok(total / states.len() as f64)
}
