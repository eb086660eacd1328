use rand::Rng;

use crate::error::Result;
use crate::gp::{GpModel, Prediction};

/// Read-only posterior interface shared by a single fitted GP and the
/// hyperparameter-marginalized mixture. Acquisition functions and batch
/// selectors are written against this trait.
pub trait Surrogate: Sync + Sized {
    fn dims(&self) -> usize;

    /// Latent posterior mean and variance at a unit-cube point.
    fn predict(&self, x: &[f64]) -> Prediction;

    /// Conditions on noise-free pseudo-observations at the current
    /// posterior mean (covariance-only update).
    fn condition_on_mean(&self, points: &[Vec<f64>]) -> Result<Self>;

    /// One joint posterior function draw over `grid`.
    fn sample_function<R: Rng + ?Sized>(&self, grid: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>>;
}

impl Surrogate for GpModel {
    fn dims(&self) -> usize {
        GpModel::dims(self)
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        GpModel::predict(self, x)
    }

    fn condition_on_mean(&self, points: &[Vec<f64>]) -> Result<Self> {
        GpModel::condition_on_mean(self, points)
    }

    fn sample_function<R: Rng + ?Sized>(&self, grid: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        GpModel::sample_function(self, grid, rng)
    }
}
