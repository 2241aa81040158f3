//! Component densities of the mixture.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::mvn_log_density;

/// Log-density of the continuous covariate block under N(μ, Σ).
pub fn log_density_cont(x: &[f64], mean: &[f64], cov: &DMatrix<f64>, cluster: usize) -> Result<f64> {
    mvn_log_density(x, mean, cov, &format!("covariate covariance of cluster {cluster}"))
}

/// Log-density of the imputed potential-outcome vector under N(μ, Σ).
/// No structure is imposed on Σ.
pub fn log_density_outcome(y: &[f64], mean: &[f64], cov: &DMatrix<f64>, cluster: usize) -> Result<f64> {
    mvn_log_density(y, mean, cov, &format!("outcome covariance of cluster {cluster}"))
}

/// Log-mass of the discrete covariates under local independence, each
/// covariate using the cluster's probabilities when selected and the
/// data-wide proportions otherwise. Returns −∞ for an impossible category.
pub fn log_mass_disc(x: &[u32], cluster_probs: &[Vec<f64>], selected: &[bool], reference: &[Vec<f64>]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(j, &code)| {
            let k = code as usize - 1;
            let p = if selected[j] {
                cluster_probs[j][k]
            } else {
                reference[j][k]
            };
            p.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let v = log_density_cont(&[0.0, 0.0], &[0.0, 0.0], &DMatrix::identity(2, 2), 0).unwrap();
        assert!((v + 1.837_877_066_409_345).abs() < 1e-12);
        let cov = DMatrix::from_diagonal_element(2, 2, 2.0);
        let v = log_density_cont(&[1.0, 1.0], &[1.0, 1.0], &cov, 0).unwrap();
        let oracle = -((2.0 * std::f64::consts::PI).ln() + 2f64.ln());
        assert!((v - oracle).abs() < 1e-12);
        assert!((v + 2.531_024_246_969_291).abs() < 1e-9);
        let v = log_density_outcome(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &DMatrix::identity(3, 3), 0).unwrap();
        assert!((v + 2.756_815_599_614_018).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_outcome_is_univariate_normal() {
        let v = log_density_outcome(&[1.5], &[0.5], &DMatrix::from_element(1, 1, 4.0), 0).unwrap();
        let oracle = -0.5 * (2.0 * std::f64::consts::PI * 4.0).ln() - 0.5 * 1.0 / 4.0;
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn non_spd_names_cluster() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        let err = log_density_cont(&[0.0, 0.0], &[0.0, 0.0], &bad, 7).unwrap_err();
        assert!(err.to_string().contains("cluster 7"));
    }

    #[test]
    fn discrete_mass() {
        let half = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let r = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let v = log_mass_disc(&[1, 2], &half, &[true, true], &r);
        assert!((v - 0.25f64.ln()).abs() < 1e-15);
        let sure = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(log_mass_disc(&[1, 2], &sure, &[true, true], &r), 0.0);
        // switched off: only the reference matters
        let a = log_mass_disc(&[1, 2], &half, &[false, false], &r);
        let b = log_mass_disc(&[1, 2], &sure, &[false, false], &r);
        assert_eq!(a, b);
        assert!((a - (0.9f64 * 0.8).ln()).abs() < 1e-15);
        assert_eq!(log_mass_disc(&[2, 1], &sure, &[true, true], &r), f64::NEG_INFINITY);
    }
}
