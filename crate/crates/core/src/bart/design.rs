use serde::Serialize;

use crate::data::Dataset;

/// What a design column encodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Feature {
    Continuous { covariate: usize },
    /// 0/1 indicator of `code` for a discrete covariate.
    Category { covariate: usize, code: u32 },
    /// 0/1 indicator of treatment arm `arm` (arm 1 is the reference).
    Arm { arm: usize },
}

/// Regression design for the single-learner fit: covariates plus K−1 arm
/// indicators, with a fixed cutpoint grid per column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Design {
    features: Vec<Feature>,
    cutpoints: Vec<Vec<f64>>,
}

impl Design {
    /// Builds the column layout and cutpoint grid from training data.
    ///
    /// Continuous columns with at most `numcut + 1` distinct values cut at the
    /// midpoints between them; otherwise `numcut` evenly spaced interior
    /// points of the observed range. Indicator columns cut at 0.5.
    pub fn from_dataset(ds: &Dataset, numcut: usize) -> Design {
        let mut features = Vec::new();
        let mut cutpoints = Vec::new();
        for j in 0..ds.n_continuous() {
            features.push(Feature::Continuous { covariate: j });
            let mut values: Vec<f64> = ds.continuous_column(j).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let cuts = if values.len() < 2 {
                Vec::new()
            } else if values.len() <= numcut + 1 {
                values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let (lo, hi) = (values[0], values[values.len() - 1]);
                let step = (hi - lo) / (numcut + 1) as f64;
                (1..=numcut).map(|c| lo + step * c as f64).collect()
            };
            cutpoints.push(cuts);
        }
        for (j, k) in ds.categories().into_iter().enumerate() {
            // A binary covariate needs one indicator; wider ones get one per level.
            let codes: Vec<u32> = if k == 2 { vec![2] } else { (1..=k as u32).collect() };
            for code in codes {
                features.push(Feature::Category { covariate: j, code });
                cutpoints.push(vec![0.5]);
            }
        }
        for arm in 2..=ds.arms() {
            features.push(Feature::Arm { arm });
            cutpoints.push(vec![0.5]);
        }
        Design {
            features,
            cutpoints,
        }
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn cutpoints(&self, column: usize) -> &[f64] {
        &self.cutpoints[column]
    }

    pub fn n_cuts(&self, column: usize) -> usize {
        self.cutpoints[column].len()
    }

    /// Feature vector of subject `i` with the treatment forced to `arm`.
    pub fn row(&self, ds: &Dataset, i: usize, arm: usize) -> Vec<f64> {
        let cont = ds.continuous_row(i);
        let disc = ds.discrete_row(i);
        self.features
            .iter()
            .map(|f| match *f {
                Feature::Continuous { covariate } => cont[covariate],
                Feature::Category { covariate, code } => (disc[covariate] == code) as u8 as f64,
                Feature::Arm { arm: a } => (arm == a) as u8 as f64,
            })
            .collect()
    }

    /// Number of cutpoints at or below each value: a row goes left at rule
    /// `(v, c)` exactly when `rank[v] <= c`, i.e. `x[v] < cutpoints[v][c]`.
    pub fn ranks(&self, row: &[f64]) -> Vec<u16> {
        row.iter()
            .zip(&self.cutpoints)
            .map(|(&x, cuts)| cuts.partition_point(|&c| c <= x) as u16)
            .collect()
    }
}
