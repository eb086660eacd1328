//! Gaussian approximation of the hyperparameter posterior around its mode.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::map::{log_posterior_with_grad, INWARD_MARGIN};
use super::prior::HyperPriors;
use crate::error::{Error, Result};
use crate::gp::{Dataset, MaternHyperparams};

/// Finite-difference step (log units) for the Hessian.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Variance assigned to parameters pinned at a prior bound.
pub const PINNED_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplacePosterior {
    pub theta_map: MaternHyperparams,
    pub theta: Vec<f64>,
    /// Covariance over the log-parameter vector; symmetric PSD.
    pub covariance: Vec<Vec<f64>>,
    pub pinned: Vec<bool>,
    /// Set when the full Hessian could not be used and the covariance is
    /// the diagonal per-parameter curvature fallback.
    pub diagonal_fallback: bool,
}

impl LaplacePosterior {
    /// A degenerate posterior concentrated on `theta_map`.
    pub fn point_mass(theta_map: MaternHyperparams) -> Self {
        let theta = theta_map.to_log_vector();
        let p = theta.len();
        LaplacePosterior {
            theta_map,
            theta,
            covariance: vec![vec![0.0; p]; p],
            pinned: vec![false; p],
            diagonal_fallback: false,
        }
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.theta.len();
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }

    pub fn is_point_mass(&self) -> bool {
        self.covariance.iter().flatten().all(|v| *v == 0.0)
    }
}

/// Flags coordinates whose estimate sits on (or within the inward margin
/// of) a bounded prior's edge.
pub fn pinned_parameters(priors: &HyperPriors, dims: usize, theta: &[f64]) -> Vec<bool> {
    priors
        .expand(dims)
        .iter()
        .zip(theta)
        .map(|(p, &v)| {
            let (lo, hi) = p.bounds();
            if !(lo.is_finite() && hi.is_finite()) {
                return false;
            }
            let tol = 2.0 * INWARD_MARGIN * (hi - lo);
            v <= lo + tol || v >= hi - tol
        })
        .collect()
}

/// Covariance `−H⁻¹` from central differences of a gradient function.
///
/// Pinned coordinates are excluded from the Hessian and get the
/// [`PINNED_FLOOR`] variance with zero covariances. Eigenvalues of the
/// result are clamped at zero. If any gradient evaluation fails or the
/// Hessian is singular, falls back to a diagonal from per-parameter
/// curvature and returns `true` as the second element.
pub fn covariance_from_gradient<G>(grad: G, theta: &[f64], pinned: &[bool], step: f64) -> (DMatrix<f64>, bool)
where
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let p = theta.len();
    let free: Vec<usize> = (0..p).filter(|&i| !pinned[i]).collect();
    let q = free.len();
    let mut sigma = DMatrix::zeros(p, p);
    for i in 0..p {
        if pinned[i] {
            sigma[(i, i)] = PINNED_FLOOR;
        }
    }
    if q == 0 {
        return (sigma, false);
    }

    // Column c holds ∂g/∂θ_free[c]; None where an evaluation failed.
    let columns: Vec<Option<Vec<f64>>> = free
        .iter()
        .map(|&j| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[j] += step;
            dn[j] -= step;
            let (gu, gd) = (grad(&up).ok()?, grad(&dn).ok()?);
            Some(free.iter().map(|&i| (gu[i] - gd[i]) / (2.0 * step)).collect())
        })
        .collect();

    let full = columns.iter().all(|c| c.as_ref().is_some_and(|v| v.iter().all(|x| x.is_finite())));
    if full {
        let mut neg_h = DMatrix::from_fn(q, q, |r, c| -columns[c].as_ref().unwrap()[r]);
        neg_h = (&neg_h + neg_h.transpose()) * 0.5;
        let eig = neg_h.symmetric_eigen();
        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let singular = eig.eigenvalues.iter().any(|v| v.abs() <= 1e-12 * max_abs.max(1e-300));
        if !singular {
            // Σ = Q diag(1/λ) Qᵀ with negative variances clamped to zero.
            let inv: Vec<f64> = eig.eigenvalues.iter().map(|l| (1.0 / l).max(0.0)).collect();
            let qm = &eig.eigenvectors;
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    sigma[(i, j)] = (0..q).map(|k| qm[(r, k)] * inv[k] * qm[(c, k)]).sum();
                }
            }
            return (sigma, false);
        }
    }

    for (c, &i) in free.iter().enumerate() {
        let curvature = columns[c].as_ref().map(|v| -v[c]).unwrap_or(f64::NAN);
        sigma[(i, i)] = if curvature.is_finite() && curvature > 0.0 {
            1.0 / curvature
        } else {
            PINNED_FLOOR
        };
    }
    (sigma, true)
}

/// Laplace approximation of the hyperparameter posterior at `theta_map`.
pub fn laplace_covariance(
    data: &Dataset,
    priors: &HyperPriors,
    theta_map: &MaternHyperparams,
) -> Result<LaplacePosterior> {
    if theta_map.length_scale.is_ard() != priors.ard {
        return Err(Error::arg("hyperparameter layout does not match the priors' ARD flag"));
    }
    let theta = theta_map.to_log_vector();
    let pinned = pinned_parameters(priors, data.dims(), &theta);
    let (sigma, fallback) = covariance_from_gradient(
        |t| log_posterior_with_grad(data, priors, t).map(|(_, g)| g),
        &theta,
        &pinned,
        HESSIAN_STEP,
    );
    let p = theta.len();
    Ok(LaplacePosterior {
        theta_map: theta_map.clone(),
        theta,
        covariance: (0..p).map(|i| (0..p).map(|j| sigma[(i, j)]).collect()).collect(),
        pinned,
        diagonal_fallback: fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gradient of the log-density of N(m, S) up to a constant.
    fn gaussian_grad(m: Vec<f64>, s: DMatrix<f64>) -> impl Fn(&[f64]) -> Result<Vec<f64>> {
        let prec = s.try_inverse().unwrap();
        move |t: &[f64]| {
            let d = nalgebra::DVector::from_iterator(t.len(), t.iter().zip(&m).map(|(a, b)| a - b));
            Ok((-(&prec * d)).iter().copied().collect())
        }
    }

    #[test]
    fn recovers_known_gaussian_covariance() {
        let s = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, -0.05, 0.1, 0.3, 0.02, -0.05, 0.02, 0.2]);
        let m = vec![0.3, -1.0, 2.0];
        let (sigma, fb) = covariance_from_gradient(gaussian_grad(m.clone(), s.clone()), &m, &[false; 3], HESSIAN_STEP);
        assert!(!fb);
        for i in 0..3 {
            for j in 0..3 {
                assert!((sigma[(i, j)] - s[(i, j)]).abs() < 1e-3, "{i},{j}");
            }
        }
    }

    #[test]
    fn pinned_parameter_gets_floor() {
        let s = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let m = vec![0.0, 0.0];
        let (sigma, _) = covariance_from_gradient(gaussian_grad(m.clone(), s), &m, &[true, false], HESSIAN_STEP);
        assert_eq!(sigma[(0, 0)], PINNED_FLOOR);
        assert_eq!(sigma[(0, 1)], 0.0);
        assert_eq!(sigma[(1, 0)], 0.0);
        assert!(sigma[(1, 1)] > 0.0);
    }

    #[test]
    fn indefinite_hessian_is_clamped_psd() {
        // Saddle: curvature -1 along e0, +2 along e1 in −H.
        let g = |t: &[f64]| Ok(vec![t[0], -2.0 * t[1]]);
        let (sigma, fb) = covariance_from_gradient(g, &[0.0, 0.0], &[false, false], HESSIAN_STEP);
        assert!(!fb);
        assert!(sigma[(0, 0)].abs() < 1e-12);
        assert!((sigma[(1, 1)] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn failing_gradient_falls_back_to_diagonal() {
        let g = |t: &[f64]| {
            if t[1] > 0.0 {
                Err(Error::Numerical("boom".into()))
            } else {
                Ok(vec![-2.0 * t[0], -t[1]])
            }
        };
        let (sigma, fb) = covariance_from_gradient(g, &[0.0, 0.0], &[false, false], HESSIAN_STEP);
        assert!(fb);
        assert!((sigma[(0, 0)] - 0.5).abs() < 1e-9);
        assert_eq!(sigma[(1, 1)], PINNED_FLOOR);
    }
}
