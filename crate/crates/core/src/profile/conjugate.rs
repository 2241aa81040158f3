use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{ln_multigamma, sample_inverse_wishart, SpdFactor};

/// Normal-inverse-Wishart hyperparameters:
/// `μ | Σ ~ N(mean, Σ / kappa)`, `Σ ~ IW(scale, dof)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwParams {
    pub mean: DVector<f64>,
    pub kappa: f64,
    pub scale: DMatrix<f64>,
    pub dof: f64,
}

/// Sufficient statistics of a set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub count: usize,
    pub sum: DVector<f64>,
    /// Σ x xᵀ
    pub outer: DMatrix<f64>,
}

impl GaussianStats {
    pub fn empty(dim: usize) -> Self {
        GaussianStats {
            count: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_rows<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut s = Self::empty(dim);
        for r in rows {
            s.push(r);
        }
        s
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.sum.len();
        self.count += 1;
        for i in 0..d {
            self.sum[i] += x[i];
            for j in 0..=i {
                self.outer[(i, j)] += x[i] * x[j];
            }
        }
        for i in 0..d {
            for j in 0..i {
                self.outer[(j, i)] = self.outer[(i, j)];
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    /// Scatter about the sample mean, Σ (x - x̄)(x - x̄)ᵀ.
    pub fn scatter(&self) -> DMatrix<f64> {
        if self.count == 0 {
            return DMatrix::zeros(self.dim(), self.dim());
        }
        let mean = &self.sum / self.count as f64;
        &self.outer - &mean * mean.transpose() * self.count as f64
    }

    /// Σ (x - c)(x - c)ᵀ for a fixed centre `c`.
    pub fn scatter_about(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let n = self.count as f64;
        &self.outer - &self.sum * c.transpose() - c * self.sum.transpose() + c * c.transpose() * n
    }
}

impl NiwParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        let d = self.dim();
        if self.scale.nrows() != d || self.scale.ncols() != d {
            return Err(Error::Config(format!("{what}: scale matrix must be {d}x{d}")));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("{what}: kappa must be positive")));
        }
        if !(self.dof > d as f64 - 1.0) {
            return Err(Error::Config(format!(
                "{what}: dof must exceed dim - 1 = {}",
                d as f64 - 1.0
            )));
        }
        if (&self.scale - self.scale.transpose()).amax() > 1e-12 * self.scale.amax().max(1.0) {
            return Err(Error::Config(format!("{what}: scale matrix must be symmetric")));
        }
        SpdFactor::new(&self.scale, what).map_err(|_| {
            Error::Config(format!("{what}: scale matrix must be positive definite"))
        })?;
        Ok(())
    }

    /// Conjugate posterior given data statistics. No data returns the prior.
    pub fn posterior(&self, stats: &GaussianStats) -> NiwParams {
        if stats.count == 0 {
            return self.clone();
        }
        let n = stats.count as f64;
        let xbar = &stats.sum / n;
        let kappa = self.kappa + n;
        let mean = (&self.mean * self.kappa + &xbar * n) / kappa;
        let diff = &xbar - &self.mean;
        let shrink = &diff * diff.transpose() * (self.kappa * n / kappa);
        let scale = crate::linalg::symmetrize(&self.scale + stats.scatter() + shrink);
        NiwParams {
            mean,
            kappa,
            scale,
            dof: self.dof + n,
        }
    }

    /// Draws (μ, Σ).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, context: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let sigma = sample_inverse_wishart(&self.scale, self.dof, rng, context)?;
        let f = SpdFactor::new(&(&sigma / self.kappa), context)?;
        let mu = f.sample_normal(self.mean.as_slice(), rng);
        Ok((DVector::from_vec(mu), sigma))
    }

    /// Log marginal likelihood of the data under this prior.
    pub fn log_marginal(&self, stats: &GaussianStats) -> Result<f64> {
        let d = self.dim();
        let n = stats.count as f64;
        let post = self.posterior(stats);
        let ld0 = SpdFactor::new(&self.scale, "prior scale")?.log_det();
        let ld1 = SpdFactor::new(&post.scale, "posterior scale")?.log_det();
        Ok(-0.5 * n * d as f64 * std::f64::consts::PI.ln()
            + ln_multigamma(d, 0.5 * post.dof)
            - ln_multigamma(d, 0.5 * self.dof)
            + 0.5 * self.dof * ld0
            - 0.5 * post.dof * ld1
            + 0.5 * d as f64 * (self.kappa.ln() - post.kappa.ln()))
    }
}

/// Conjugate NIW update.
pub fn conjugate_update_niw(prior: &NiwParams, data: &[&[f64]]) -> NiwParams {
    let stats = GaussianStats::from_rows(prior.dim(), data.iter().copied());
    prior.posterior(&stats)
}

/// Dirichlet posterior concentration `a + counts`.
pub fn conjugate_update_dirichlet(a: &[f64], counts: &[usize]) -> Vec<f64> {
    a.iter().zip(counts).map(|(a, &c)| a + c as f64).collect()
}

/// Log marginal likelihood of a categorical sequence with these counts
/// under Dirichlet(a).
pub fn dirichlet_log_marginal(a: &[f64], counts: &[usize]) -> f64 {
    let a0: f64 = a.iter().sum();
    let n: usize = counts.iter().sum();
    let mut out = ln_gamma(a0) - ln_gamma(a0 + n as f64);
    for (&ak, &c) in a.iter().zip(counts) {
        if c > 0 {
            out += ln_gamma(ak + c as f64) - ln_gamma(ak);
        }
    }
    out
}

/// Draws a probability vector from Dirichlet(a).
pub fn sample_dirichlet<R: Rng + ?Sized>(a: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = a
        .iter()
        .map(|&ak| Gamma::new(ak, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 && total.is_finite() {
        for v in g.iter_mut() {
            *v /= total;
        }
    } else {
        // All gammas underflowed (tiny concentrations): put the mass on the largest.
        let k = a
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[k] = 1.0;
    }
    g
}
