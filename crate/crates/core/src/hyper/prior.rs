use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior on one internal coordinate of the parameter vector (log scale for
/// the noise, amplitude and length-scales, raw scale for the mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamPrior {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, var: f64 },
}

impl ParamPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamPrior::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::arg(format!("uniform prior needs lo < hi, got [{lo}, {hi}]")))
            }
            ParamPrior::Gaussian { mean, var } if !(mean.is_finite() && var > 0.0 && var.is_finite()) => {
                Err(Error::arg(format!("gaussian prior needs var > 0, got {var}")))
            }
            _ => Ok(()),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ParamPrior::Uniform { lo, hi } => (lo, hi),
            ParamPrior::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn log_density(&self, v: f64) -> f64 {
        match *self {
            ParamPrior::Uniform { lo, hi } => {
                if v >= lo && v <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ParamPrior::Gaussian { mean, var } => {
                -0.5 * (v - mean).powi(2) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
            }
        }
    }

    pub fn grad(&self, v: f64) -> f64 {
        match *self {
            ParamPrior::Uniform { .. } => 0.0,
            ParamPrior::Gaussian { mean, var } => -(v - mean) / var,
        }
    }
}

/// Independent priors over `[ln σn², ln σ0, ln ℓ.., μ0]`.
///
/// With `ard` set, every per-dimension length-scale shares the
/// `length_scale` prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub noise_var: ParamPrior,
    pub amplitude: ParamPrior,
    pub length_scale: ParamPrior,
    pub mean: ParamPrior,
    #[serde(default)]
    pub ard: bool,
}

impl HyperPriors {
    /// The same uniform log-scale range on every covariance parameter, with
    /// a Gaussian prior on the mean.
    pub fn uniform_log(lo: f64, hi: f64, mean: ParamPrior) -> Self {
        let u = ParamPrior::Uniform { lo, hi };
        HyperPriors {
            noise_var: u,
            amplitude: u,
            length_scale: u,
            mean,
            ard: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.noise_var, &self.amplitude, &self.length_scale, &self.mean] {
            p.validate()?;
        }
        Ok(())
    }

    /// Per-coordinate priors laid out like the log-parameter vector.
    pub fn expand(&self, dims: usize) -> Vec<ParamPrior> {
        let n_ls = if self.ard { dims } else { 1 };
        let mut v = vec![self.noise_var, self.amplitude];
        v.extend(std::iter::repeat_n(self.length_scale, n_ls));
        v.push(self.mean);
        v
    }

    pub fn log_density(&self, theta: &[f64], dims: usize) -> f64 {
        self.expand(dims)
            .iter()
            .zip(theta)
            .map(|(p, &v)| p.log_density(v))
            .sum()
    }

    pub fn grad(&self, theta: &[f64], dims: usize) -> Vec<f64> {
        self.expand(dims)
            .iter()
            .zip(theta)
            .map(|(p, &v)| p.grad(v))
            .collect()
    }

    /// Draws a starting point: uniform coordinates inside their support,
    /// Gaussian coordinates at the prior mean, and the constant mean at
    /// `data_mean` (clamped into its support).
    pub(crate) fn sample_start<R: Rng + ?Sized>(&self, dims: usize, data_mean: f64, rng: &mut R) -> Vec<f64> {
        let priors = self.expand(dims);
        let last = priors.len() - 1;
        priors
            .iter()
            .enumerate()
            .map(|(i, p)| match *p {
                _ if i == last => {
                    let (lo, hi) = p.bounds();
                    data_mean.clamp(lo, hi)
                }
                ParamPrior::Uniform { lo, hi } => rng.random_range(lo..hi),
                ParamPrior::Gaussian { mean, .. } => mean,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_flat_inside_and_impossible_outside() {
        let p = ParamPrior::Uniform { lo: -1.0, hi: 2.0 };
        assert_eq!(p.log_density(0.0), p.log_density(1.5));
        assert_eq!(p.log_density(2.5), f64::NEG_INFINITY);
        assert_eq!(p.grad(0.3), 0.0);
    }

    #[test]
    fn gaussian_density_and_gradient() {
        let p = ParamPrior::Gaussian { mean: 0.0, var: 100.0f64.powi(2) };
        let h = 1e-4;
        let fd = (p.log_density(3.0 + h) - p.log_density(3.0 - h)) / (2.0 * h);
        assert!((fd - p.grad(3.0)).abs() < 1e-9);
    }

    #[test]
    fn layout_follows_ard_flag() {
        let mut pr = HyperPriors::uniform_log(-1.0, 2.0, ParamPrior::Gaussian { mean: 0.0, var: 1.0 });
        assert_eq!(pr.expand(3).len(), 4);
        pr.ard = true;
        assert_eq!(pr.expand(3).len(), 6);
    }

    #[test]
    fn invalid_priors_rejected() {
        assert!(ParamPrior::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(ParamPrior::Gaussian { mean: 0.0, var: 0.0 }.validate().is_err());
    }
}
