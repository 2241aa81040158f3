//! Small dense linear algebra used by the samplers.
//!
//! Matrices here are tiny (covariate and arm counts), so the hot paths work
//! on flat row-major slices with caller-provided scratch space instead of
//! allocating per evaluation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Cholesky factor of a symmetric positive-definite matrix, kept with its
/// log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    dim: usize,
    /// Row-major lower triangle (full square storage).
    lower: Vec<f64>,
    log_det: f64,
}

impl SpdFactor {
    /// Factorises `m`. On failure a jitter of `1e-8 * trace / dim` is added
    /// to the diagonal once; a second failure is an error naming `context`.
    pub fn new(m: &DMatrix<f64>, context: &str) -> Result<Self> {
        let dim = m.nrows();
        if dim != m.ncols() {
            return Err(Error::Dimension(format!(
                "{context}: covariance is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if dim == 0 {
            return Ok(SpdFactor {
                dim,
                lower: Vec::new(),
                log_det: 0.0,
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                context: context.to_string(),
            });
        }
        let chol = match m.clone().cholesky() {
            Some(c) => c,
            None => {
                let jitter = 1e-8 * m.trace().abs().max(f64::MIN_POSITIVE) / dim as f64;
                let mut jittered = m.clone();
                for i in 0..dim {
                    jittered[(i, i)] += jitter;
                }
                jittered
                    .cholesky()
                    .ok_or_else(|| Error::NotPositiveDefinite {
                        context: context.to_string(),
                    })?
            }
        };
        let l = chol.l();
        let mut lower = vec![0.0; dim * dim];
        let mut log_det = 0.0;
        for i in 0..dim {
            for j in 0..=i {
                lower[i * dim + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite {
                context: context.to_string(),
            });
        }
        Ok(SpdFactor {
            dim,
            lower,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.lower)
    }

    /// `diffᵀ Σ⁻¹ diff`, by forward substitution into `scratch`.
    #[inline]
    pub fn mahalanobis_sq(&self, diff: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let row = &self.lower[i * d..i * d + i];
            let mut s = diff[i];
            for (l, z) in row.iter().zip(scratch.iter()) {
                s -= l * z;
            }
            let z = s / self.lower[i * d + i];
            scratch[i] = z;
            acc += z * z;
        }
        acc
    }

    /// Multivariate normal log-density of `x` with mean `mean` and this
    /// covariance. `scratch` must hold at least `2 * dim` values.
    #[inline]
    pub fn mvn_log_density(&self, x: &[f64], mean: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.dim;
        let (diff, work) = scratch.split_at_mut(d);
        for ((o, a), b) in diff.iter_mut().zip(x).zip(mean) {
            *o = a - b;
        }
        let q = self.mahalanobis_sq(diff, work);
        -0.5 * (d as f64 * LN_2PI + self.log_det + q)
    }

    /// Draws from N(mean, Σ).
    pub fn sample_normal<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| {
                mean[i]
                    + (0..=i)
                        .map(|j| self.lower[i * d + j] * z[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Log-density of N(mean, cov) at `x`.
pub fn mvn_log_density(x: &[f64], mean: &[f64], cov: &DMatrix<f64>, context: &str) -> Result<f64> {
    if x.len() != mean.len() || x.len() != cov.nrows() {
        return Err(Error::Dimension(format!(
            "{context}: point has {} entries, mean {}, covariance {}x{}",
            x.len(),
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let f = SpdFactor::new(cov, context)?;
    let mut scratch = vec![0.0; 2 * x.len()];
    Ok(f.mvn_log_density(x, mean, &mut scratch))
}

/// Draws Σ ~ inverse-Wishart(scale, dof) via the Bartlett decomposition.
///
/// With `scale = U Uᵀ` and `Z = A Aᵀ ~ Wishart(I, dof)`, `Σ = U Z⁻¹ Uᵀ`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut R,
    context: &str,
) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if dof <= p as f64 - 1.0 {
        return Err(Error::Config(format!(
            "{context}: inverse-Wishart needs dof > dim - 1 (dof {dof}, dim {p})"
        )));
    }
    let u = SpdFactor::new(scale, context)?.lower();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(dof - i as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let a_inv = a
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Numerical(format!("{context}: singular Bartlett factor")))?;
    let c = u * a_inv.transpose();
    let sigma = &c * c.transpose();
    Ok(symmetrize(sigma))
}

pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// log of the multivariate gamma function Γ_p(a).
pub fn ln_multigamma(p: usize, a: f64) -> f64 {
    let mut out = 0.25 * (p * p.saturating_sub(1)) as f64 * PI.ln();
    for j in 0..p {
        out += statrs::function::gamma::ln_gamma(a - 0.5 * j as f64);
    }
    out
}

/// Column means of a set of equal-length rows.
pub fn mean_of(rows: &[&[f64]], dim: usize) -> DVector<f64> {
    let mut m = DVector::zeros(dim);
    for r in rows {
        for j in 0..dim {
            m[j] += r[j];
        }
    }
    if !rows.is_empty() {
        m /= rows.len() as f64;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn standard_normal_at_mean() {
        let v = mvn_log_density(&[0.0], &[0.0], &DMatrix::identity(1, 1), "t").unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn non_spd_is_reported_with_context() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = SpdFactor::new(&m, "cluster 4").unwrap_err();
        assert!(err.to_string().contains("cluster 4"));
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SpdFactor::new(&m, "t").is_ok());
    }

    #[test]
    fn inverse_wishart_mean_matches() {
        // E[Σ] = scale / (dof - p - 1)
        let scale = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let dof = 7.0;
        let mut rng = rng_from(11);
        let draws = 40_000;
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..draws {
            acc += sample_inverse_wishart(&scale, dof, &mut rng, "t").unwrap();
        }
        acc /= draws as f64;
        let expect = &scale / (dof - 3.0);
        for (a, e) in acc.iter().zip(expect.iter()) {
            assert!((a - e).abs() < 0.03, "{acc} vs {expect}");
        }
    }
}
