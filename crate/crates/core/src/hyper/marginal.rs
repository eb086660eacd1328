//! Hyperparameter-marginalized prediction.
//!
//! The Laplace posterior over the log-parameters is replaced by a
//! deterministic sigma-point set, `θ̂ ± √(p+κ)·cᵢ` where `cᵢ` are the
//! columns of the symmetric square root of `Σ̂`. Each point refits the GP
//! on the same data; predictions are the moments of the resulting
//! equal-weight Gaussian mixture.

use rand::Rng;

use super::laplace::LaplacePosterior;
use super::prior::HyperPriors;
use crate::error::{Error, Result};
use crate::gp::{GpModel, MaternHyperparams, Prediction};
use crate::surrogate::Surrogate;

/// Sigma-point spread parameter κ.
pub const SIGMA_KAPPA: f64 = 0.0;

/// Mixture moments, split by the law of total variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePrediction {
    pub mean: f64,
    /// Weighted mean of the component variances.
    pub within: f64,
    /// Weighted variance of the component means.
    pub between: f64,
}

impl MixturePrediction {
    pub fn variance(&self) -> f64 {
        self.within + self.between
    }
}

/// Weighted mixture of GPs fitted to the same data.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    components: Vec<GpModel>,
    weights: Vec<f64>,
}

impl MixtureModel {
    pub fn new(components: Vec<GpModel>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::arg("mixture needs one weight per component"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::arg("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!("mixture weights sum to {total}")));
        }
        Ok(MixtureModel { components, weights })
    }

    /// A single-component mixture.
    pub fn single(model: GpModel) -> Self {
        MixtureModel {
            components: vec![model],
            weights: vec![1.0],
        }
    }

    pub fn components(&self) -> &[GpModel] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict_moments(&self, x: &[f64]) -> MixturePrediction {
        let preds: Vec<Prediction> = self.components.iter().map(|c| c.predict(x)).collect();
        let mean: f64 = preds.iter().zip(&self.weights).map(|(p, w)| w * p.mean).sum();
        let within: f64 = preds.iter().zip(&self.weights).map(|(p, w)| w * p.variance).sum();
        let between: f64 = preds
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * (p.mean - mean).powi(2))
            .sum();
        MixturePrediction { mean, within, between }
    }
}

impl Surrogate for MixtureModel {
    fn dims(&self) -> usize {
        self.components[0].dims()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        let m = self.predict_moments(x);
        Prediction {
            mean: m.mean,
            variance: m.variance(),
        }
    }

    fn condition_on_mean(&self, points: &[Vec<f64>]) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.condition_on_mean(points))
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureModel {
            components,
            weights: self.weights.clone(),
        })
    }

    /// Picks a component by weight, then draws jointly from it.
    fn sample_function<R: Rng + ?Sized>(&self, grid: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        let idx = if self.components.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            self.weights
                .iter()
                .position(|w| {
                    acc += w;
                    u < acc
                })
                .unwrap_or(self.components.len() - 1)
        };
        self.components[idx].sample_function(grid, rng)
    }
}

/// Sigma points (log-parameter vectors) and their weights. Points that
/// coincide with the mode are merged into a single mode entry, listed first.
pub fn sigma_points(lap: &LaplacePosterior, priors: &HyperPriors, dims: usize) -> Vec<(Vec<f64>, f64)> {
    let p = lap.theta.len();
    let scale = (p as f64 + SIGMA_KAPPA).sqrt();
    let sigma = lap.covariance_matrix();
    let eig = sigma.symmetric_eigen();
    let sqrt_vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    let q = &eig.eigenvectors;
    let root = nalgebra::DMatrix::<f64>::from_fn(p, p, |i, j| (0..p).map(|k| q[(i, k)] * sqrt_vals[k] * q[(j, k)]).sum());

    let bounds: Vec<(f64, f64)> = priors.expand(dims).iter().map(|pr| pr.bounds()).collect();
    let w = 1.0 / (2.0 * (p as f64 + SIGMA_KAPPA));
    let mut mode_weight = SIGMA_KAPPA / (p as f64 + SIGMA_KAPPA);
    let mut others = Vec::new();
    for i in 0..p {
        for sign in [1.0, -1.0] {
            let pt: Vec<f64> = (0..p)
                .map(|r| {
                    let (lo, hi) = bounds[r];
                    (lap.theta[r] + sign * scale * root[(r, i)]).clamp(lo, hi)
                })
                .collect();
            if pt == lap.theta {
                mode_weight += w;
            } else {
                others.push((pt, w));
            }
        }
    }
    let mut out = Vec::with_capacity(others.len() + 1);
    if mode_weight > 0.0 {
        out.push((lap.theta.clone(), mode_weight));
    }
    out.extend(others);
    out
}

/// Builds the sigma-point mixture around `model`, which must have been
/// fitted at the Laplace mode.
pub fn marginalized_model(model: &GpModel, lap: &LaplacePosterior, priors: &HyperPriors) -> Result<MixtureModel> {
    let points = sigma_points(lap, priors, model.dims());
    let ard = model.hyper().length_scale.is_ard();
    let mut components = Vec::with_capacity(points.len());
    let mut weights = Vec::with_capacity(points.len());
    for (theta, w) in points {
        let comp = if theta == lap.theta {
            model.clone()
        } else {
            GpModel::fit(model.data(), &MaternHyperparams::from_log_vector(&theta, ard)?)?
        };
        components.push(comp);
        weights.push(w);
    }
    // Normalize exactly; with a single component this is 1.0.
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    MixtureModel::new(components, weights)
}

/// Marginalized posterior at one point.
pub fn marginalized_posterior(
    model: &GpModel,
    lap: &LaplacePosterior,
    priors: &HyperPriors,
    x: &[f64],
) -> Result<MixturePrediction> {
    Ok(marginalized_model(model, lap, priors)?.predict_moments(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Dataset;
    use crate::hyper::ParamPrior;

    fn setup() -> (GpModel, HyperPriors) {
        let d = Dataset::from_rows(
            1,
            vec![vec![0.1], vec![0.4], vec![0.4], vec![0.85]],
            vec![1.0, -0.3, -0.1, 0.6],
        )
        .unwrap();
        let h = MaternHyperparams::isotropic(0.05, 1.0, 0.3, 0.2).unwrap();
        let pr = HyperPriors::uniform_log(-8.0, 3.0, ParamPrior::Gaussian { mean: 0.0, var: 1e4 });
        (GpModel::fit(&d, &h).unwrap(), pr)
    }

    #[test]
    fn zero_covariance_reproduces_plain_posterior() {
        let (m, pr) = setup();
        let lap = LaplacePosterior::point_mass(m.hyper().clone());
        for x in [0.0, 0.25, 0.4, 0.77, 1.0] {
            let mp = marginalized_posterior(&m, &lap, &pr, &[x]).unwrap();
            let p = m.predict(&[x]);
            assert_eq!(mp.mean, p.mean);
            assert_eq!(mp.variance(), p.variance);
        }
    }

    #[test]
    fn total_variance_decomposition() {
        let (m, pr) = setup();
        let mut lap = LaplacePosterior::point_mass(m.hyper().clone());
        for i in 0..4 {
            lap.covariance[i][i] = 0.05 * (i + 1) as f64;
        }
        lap.covariance[1][2] = 0.01;
        lap.covariance[2][1] = 0.01;
        let mix = marginalized_model(&m, &lap, &pr).unwrap();
        assert_eq!(mix.components().len(), 8);
        for i in 0..=10 {
            let p = mix.predict_moments(&[i as f64 / 10.0]);
            assert!(p.between >= 0.0 && p.within >= 0.0);
            assert!(p.variance() >= p.between);
        }
    }

    #[test]
    fn two_component_moments_by_hand() {
        let d = Dataset::from_rows(1, vec![vec![0.2], vec![0.7]], vec![0.5, -1.0]).unwrap();
        let a = GpModel::fit(&d, &MaternHyperparams::isotropic(0.1, 1.0, 0.2, 0.0).unwrap()).unwrap();
        let b = GpModel::fit(&d, &MaternHyperparams::isotropic(0.3, 2.0, 0.5, 0.4).unwrap()).unwrap();
        let mix = MixtureModel::new(vec![a.clone(), b.clone()], vec![0.5, 0.5]).unwrap();
        let x = [0.45];
        let (pa, pb) = (a.predict(&x), b.predict(&x));
        let mean = 0.5 * pa.mean + 0.5 * pb.mean;
        let second = 0.5 * (pa.variance + pa.mean * pa.mean) + 0.5 * (pb.variance + pb.mean * pb.mean);
        let var = second - mean * mean;
        let got = mix.predict_moments(&x);
        assert!((got.mean - mean).abs() <= 1e-10 * mean.abs().max(1.0));
        assert!((got.variance() - var).abs() <= 1e-10 * var.abs().max(1.0));
    }

    #[test]
    fn sigma_points_respect_support() {
        let (m, _) = setup();
        let pr = HyperPriors::uniform_log(-3.5, 3.0, ParamPrior::Uniform { lo: -1.0, hi: 1.0 });
        let mut lap = LaplacePosterior::point_mass(m.hyper().clone());
        for i in 0..4 {
            lap.covariance[i][i] = 4.0;
        }
        for (pt, _) in sigma_points(&lap, &pr, 1) {
            for (v, p) in pt.iter().zip(pr.expand(1)) {
                let (lo, hi) = p.bounds();
                assert!(*v >= lo && *v <= hi);
            }
        }
    }
}
