use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::conjugate::NiwParams;
use super::data::ProfileData;
use super::selection::SelectionPrior;
use crate::error::{Error, Result};

/// Default NIW mean-precision multiplier κ₀.
pub const DEFAULT_KAPPA: f64 = 0.01;
/// Default NIW degrees of freedom are `dim + DEFAULT_DOF_OFFSET`.
pub const DEFAULT_DOF_OFFSET: f64 = 2.0;
/// Default symmetric Dirichlet concentration.
pub const DEFAULT_DIRICHLET: f64 = 1.0;
/// Default Gamma(shape, rate) prior on the concentration α.
pub const DEFAULT_ALPHA_SHAPE: f64 = 2.0;
pub const DEFAULT_ALPHA_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// All hyperparameters of the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// NIW prior of the continuous covariate block; `None` when there are
    /// no continuous covariates.
    pub covariates: Option<NiwParams>,
    pub outcome: NiwParams,
    /// Dirichlet concentrations per discrete covariate.
    pub dirichlet: Vec<Vec<f64>>,
    pub alpha: GammaPrior,
    pub selection: SelectionPrior,
}

impl PriorSpec {
    /// Data-scaled weakly-informative defaults: empirical means, κ₀ = 0.01,
    /// ν₀ = dim + 2, diagonal empirical variances as the scale matrix,
    /// unit Dirichlet concentrations and α ~ Gamma(2, 1).
    pub fn default_for(data: &ProfileData) -> Result<Self> {
        if data.n() == 0 {
            return Err(Error::Data("cannot derive default priors from an empty dataset".into()));
        }
        let covariates = (data.p1() > 0).then(|| {
            let rows: Vec<&[f64]> = (0..data.n()).map(|i| data.continuous_row(i)).collect();
            empirical_niw(&rows, data.p1())
        });
        let rows: Vec<&[f64]> = (0..data.n()).map(|i| data.outcome_row(i)).collect();
        let outcome = empirical_niw(&rows, data.arms());
        let dirichlet = data
            .categories()
            .iter()
            .map(|&k| vec![DEFAULT_DIRICHLET; k])
            .collect();
        let prior = PriorSpec {
            covariates,
            outcome,
            dirichlet,
            alpha: GammaPrior {
                shape: DEFAULT_ALPHA_SHAPE,
                rate: DEFAULT_ALPHA_RATE,
            },
            selection: SelectionPrior::default(),
        };
        // Nothing here was configured by the user: a failure means the data
        // themselves are numerically degenerate (e.g. overflowing variances).
        prior
            .validate(data)
            .map_err(|e| Error::Numerical(format!("prior derived from the data is unusable: {e}")))?;
        Ok(prior)
    }

    /// Checks the hyperparameters and their dimensions against the data.
    pub fn validate(&self, data: &ProfileData) -> Result<()> {
        match (&self.covariates, data.p1()) {
            (None, 0) => {}
            (Some(p), p1) if p.dim() == p1 => p.validate("covariate prior")?,
            _ => return Err(Error::Config("covariate prior dimension does not match the data".into())),
        }
        if self.outcome.dim() != data.arms() {
            return Err(Error::Config("outcome prior dimension does not match the arm count".into()));
        }
        self.outcome.validate("outcome prior")?;
        if self.dirichlet.len() != data.p2() {
            return Err(Error::Config("one Dirichlet concentration vector per discrete covariate".into()));
        }
        for (a, &k) in self.dirichlet.iter().zip(data.categories()) {
            if a.len() != k || a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!(
                    "Dirichlet concentrations must be {k} positive values"
                )));
            }
        }
        if !(self.alpha.shape > 0.0 && self.alpha.rate > 0.0) {
            return Err(Error::Config("Gamma prior on alpha needs positive shape and rate".into()));
        }
        let s = &self.selection;
        if !(0.0..1.0).contains(&s.atom) || !(s.a > 0.0 && s.b > 0.0) {
            return Err(Error::Config(
                "selection prior needs atom weight in [0, 1) and positive beta parameters".into(),
            ));
        }
        Ok(())
    }
}

fn empirical_niw(rows: &[&[f64]], dim: usize) -> NiwParams {
    let n = rows.len() as f64;
    let mean = crate::linalg::mean_of(rows, dim);
    let mut scale = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        // A constant column would give a singular scale; fall back to unit scale.
        scale[(j, j)] = if var > 1e-12 { var } else { 1.0 };
    }
    NiwParams {
        mean: DVector::from_iterator(dim, mean.iter().copied()),
        kappa: DEFAULT_KAPPA,
        scale,
        dof: dim as f64 + DEFAULT_DOF_OFFSET,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_data_scaled() {
        let data = ProfileData::from_parts(
            1,
            vec![2],
            2,
            vec![1.0, 2.0, 3.0],
            vec![1, 2, 2],
            vec![0.0, 5.0, 0.0, 5.0, 0.0, 5.0],
        )
        .unwrap();
        let p = PriorSpec::default_for(&data).unwrap();
        let cov = p.covariates.as_ref().unwrap();
        assert_eq!(cov.mean[0], 2.0);
        assert_eq!(cov.scale[(0, 0)], 1.0);
        assert_eq!(cov.kappa, 0.01);
        assert_eq!(cov.dof, 3.0);
        // constant outcome columns get unit scale
        assert_eq!(p.outcome.scale, DMatrix::identity(2, 2));
        assert_eq!(p.outcome.dof, 4.0);
        assert_eq!(p.dirichlet, vec![vec![1.0, 1.0]]);
        assert_eq!(p.alpha.mean(), 2.0);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let data = ProfileData::from_parts(0, vec![], 1, vec![], vec![], vec![1.0, 2.0]).unwrap();
        let mut p = PriorSpec::default_for(&data).unwrap();
        p.alpha.rate = 0.0;
        assert!(p.validate(&data).is_err());
        let mut p = PriorSpec::default_for(&data).unwrap();
        p.outcome.dof = -1.0;
        assert!(p.validate(&data).is_err());
    }
}
