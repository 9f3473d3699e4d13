//! Zero-mean Gaussian-process regression with an anisotropic RBF kernel.

use thiserror::Error;

use super::{AttackConfig, Observation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("kernel matrix is not positive definite (pivot {pivot}); duplicate inputs need noise > 0")]
    NotPositiveDefinite { pivot: usize },
    #[error("a Gaussian process needs at least one observation")]
    NoObservations,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    /// Per-dimension length scales `(radians, meters)`.
    pub length_scale: [f64; 2],
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self { length_scale: [0.5, 1.0], signal_variance: 1.0, noise_variance: 1e-4 }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.length_scale.iter().all(|l| *l > 0.0) && self.signal_variance > 0.0 && self.noise_variance >= 0.0)
        {
            return Err(GpError::InvalidHyper(format!("{self:?}")));
        }
        Ok(())
    }

    /// `σ² exp(-Σ_d (a_d - b_d)² / (2 ℓ_d²))`
    #[inline]
    pub fn kernel(&self, a: &AttackConfig, b: &AttackConfig) -> f64 {
        let dt = (a.theta - b.theta) / self.length_scale[0];
        let dr = (a.r - b.r) / self.length_scale[1];
        self.signal_variance * (-0.5 * (dt * dt + dr * dr)).exp()
    }
}

/// Lower-triangular Cholesky factor in row-major packed-square storage.
#[derive(Debug, Clone, PartialEq)]
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &[f64], n: usize) -> Result<Self, GpError> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(GpError::NotPositiveDefinite { pivot: i });
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `L z = b`.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.l[i * n + k] * z[k];
            }
            z[i] /= self.l[i * n + i];
        }
        z
    }

    /// Solves `L^T x = z`.
    fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.l[k * n + i] * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        x
    }

    fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}

/// A fitted GP posterior. Immutable; refitting produces a new model.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    observations: Vec<Observation>,
    hyper: GpHyper,
    chol: Cholesky,
    /// `(K + σ_n² I)^-1 y`
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn fit(observations: Vec<Observation>, hyper: GpHyper) -> Result<Self, GpError> {
        hyper.validate()?;
        if observations.is_empty() {
            return Err(GpError::NoObservations);
        }
        let n = observations.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = hyper.kernel(&observations[i].config, &observations[j].config);
            }
            k[i * n + i] += hyper.noise_variance;
        }
        let chol = Cholesky::factor(&k, n)?;
        let y: Vec<f64> = observations.iter().map(|o| o.deviation).collect();
        let alpha = chol.backward(&chol.forward(&y));
        Ok(Self { observations, hyper, chol, alpha })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    /// Posterior mean and latent variance (clamped at zero).
    pub fn predict(&self, x: &AttackConfig) -> (f64, f64) {
        let ks: Vec<f64> = self.observations.iter().map(|o| self.hyper.kernel(&o.config, x)).collect();
        let mean = ks.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = self.chol.forward(&ks);
        let var = self.hyper.signal_variance - v.iter().map(|z| z * z).sum::<f64>();
        (mean, var.max(0.0))
    }

    pub fn predict_batch(&self, xs: &[AttackConfig]) -> Vec<(f64, f64)> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// `-½ yᵀα - ½ log|K| - n/2 log 2π`
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.observations.len() as f64;
        let fit: f64 = self.observations.iter().zip(&self.alpha).map(|(o, a)| o.deviation * a).sum();
        -0.5 * fit - 0.5 * self.chol.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Grid search over length scales and signal variance by log marginal likelihood.
/// Noise variance is kept from `base`. Ties keep the earlier grid point.
pub fn tune_hyperparameters(
    observations: &[Observation],
    base: GpHyper,
    theta_scales: &[f64],
    r_scales: &[f64],
    signal_variances: &[f64],
) -> Result<GpHyper, GpError> {
    let mut best: Option<(f64, GpHyper)> = None;
    for &lt in theta_scales {
        for &lr in r_scales {
            for &sv in signal_variances {
                let hyper = GpHyper { length_scale: [lt, lr], signal_variance: sv, ..base };
                let Ok(model) = GpModel::fit(observations.to_vec(), hyper) else { continue };
                let lml = model.log_marginal_likelihood();
                if best.is_none_or(|(b, _)| lml > b) {
                    best = Some((lml, hyper));
                }
            }
        }
    }
    best.map(|(_, h)| h).ok_or(GpError::NoObservations)
}
