use serde::Serialize;

use super::dataset::Dataset;

/// Data-wide reference profile: the column mean of every continuous
/// covariate and the observed category proportions of every discrete one.
/// Deselected covariates fall back to these values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReference {
    pub means: Vec<f64>,
    pub proportions: Vec<Vec<f64>>,
}

pub fn summarize_columns(ds: &Dataset) -> EmpiricalReference {
    let n = ds.n() as f64;
    let means = (0..ds.n_continuous())
        .map(|j| ds.continuous_column(j).sum::<f64>() / n)
        .collect();
    let proportions = ds
        .categories()
        .into_iter()
        .enumerate()
        .map(|(j, k)| {
            let mut counts = vec![0usize; k];
            for c in ds.discrete_column(j) {
                counts[c as usize - 1] += 1;
            }
            counts.into_iter().map(|c| c as f64 / n).collect()
        })
        .collect();
    EmpiricalReference { means, proportions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::CategoryEncoding;
    use crate::data::schema::{CovariateSpec, Schema};

    fn dataset(cont: Vec<f64>, disc: Vec<u32>, k: usize) -> Dataset {
        let n = cont.len();
        let schema = Schema {
            id: None,
            treatment: "A".into(),
            arms: 1,
            outcome: "Y".into(),
            utility: None,
            covariates: vec![CovariateSpec::continuous("x"), CovariateSpec::discrete("d", None)],
        };
        Dataset::from_parts(
            schema,
            (1..=n).map(|i| i.to_string()).collect(),
            vec![1; n],
            vec![0.0; n],
            None,
            cont,
            disc,
            vec![CategoryEncoding {
                covariate: "d".into(),
                levels: (1..=k).map(|i| i.to_string()).collect(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn mean_and_proportions() {
        let ds = dataset(vec![1.0, 2.0, 3.0, 2.0], vec![1, 1, 2, 2], 2);
        let r = summarize_columns(&ds);
        assert_eq!(r.means, vec![2.0]);
        assert_eq!(r.proportions, vec![vec![0.5, 0.5]]);

        let ds = dataset(vec![0.0; 4], vec![1, 1, 1, 2], 3);
        let r = summarize_columns(&ds);
        assert_eq!(r.proportions, vec![vec![0.75, 0.25, 0.0]]);
    }

    #[test]
    fn three_point_mean() {
        let ds = dataset(vec![1.0, 2.0, 3.0], vec![1, 2, 1], 2);
        assert_eq!(summarize_columns(&ds).means, vec![2.0]);
    }
}
