use rand::Rng;
use rayon::prelude::*;

use super::optimize::{maximize, AscentOptions};
use super::prior::HyperPriors;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel, MaternHyperparams};

/// Fraction of a uniform prior's range by which a binding estimate is
/// moved back inside the support.
pub const INWARD_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MapEstimate {
    pub hyper: MaternHyperparams,
    /// Log-posterior (log-likelihood plus log-prior) at the estimate.
    pub log_posterior: f64,
    /// Log-parameter vector of the estimate.
    pub theta: Vec<f64>,
    pub restarts_succeeded: usize,
    /// Restarts whose ascent met the gradient or stall criterion.
    pub restarts_converged: usize,
}

/// Log-posterior and gradient over the log-parameter vector.
pub fn log_posterior_with_grad(
    data: &Dataset,
    priors: &HyperPriors,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (ll, mut g) = log_likelihood_with_grad(data, priors.ard, theta)?;
    let lp = priors.log_density(theta, data.dims());
    for (gi, pi) in g.iter_mut().zip(priors.grad(theta, data.dims())) {
        *gi += pi;
    }
    Ok((ll + lp, g))
}

pub(crate) fn log_likelihood_with_grad(data: &Dataset, ard: bool, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let hyper = MaternHyperparams::from_log_vector(theta, ard)?;
    let m = GpModel::fit(data, &hyper)?;
    Ok((m.log_marginal_likelihood(), m.log_marginal_likelihood_grad()))
}

fn check_inputs(data: &Dataset, priors: &HyperPriors, restarts: usize) -> Result<()> {
    priors.validate()?;
    if data.is_empty() {
        return Err(Error::arg("MAP estimation needs at least one observation"));
    }
    if restarts == 0 {
        return Err(Error::arg("MAP estimation needs at least one restart"));
    }
    Ok(())
}

fn starts<R: Rng + ?Sized>(
    data: &Dataset,
    priors: &HyperPriors,
    restarts: usize,
    warm_start: Option<&MaternHyperparams>,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut v = Vec::with_capacity(restarts);
    if let Some(w) = warm_start {
        if w.length_scale.is_ard() == priors.ard {
            v.push(w.to_log_vector());
        }
    }
    while v.len() < restarts {
        v.push(priors.sample_start(data.dims(), data.mean(), rng));
    }
    v
}

fn run_restarts<F>(
    starts: Vec<Vec<f64>>,
    lo: &[f64],
    hi: &[f64],
    objective: F,
) -> Result<(Vec<f64>, f64, usize, usize)>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync,
{
    let results: Vec<Option<(Vec<f64>, f64, bool)>> = starts
        .par_iter()
        .map(|s| {
            maximize(&objective, s, lo, hi, AscentOptions::default())
                .ok()
                .filter(|r| r.value.is_finite())
                .map(|r| (r.x, r.value, r.converged))
        })
        .collect();
    let succeeded = results.iter().filter(|r| r.is_some()).count();
    let converged = results.iter().flatten().filter(|r| r.2).count();
    // Indexed reduction: ties resolve to the earliest restart.
    let best = results
        .into_iter()
        .flatten()
        .fold(None::<(Vec<f64>, f64)>, |acc, r| match acc {
            Some(ref a) if a.1 >= r.1 => acc,
            _ => Some((r.0, r.1)),
        });
    match best {
        Some((x, v)) => Ok((x, v, succeeded, converged)),
        None => Err(Error::Numerical(format!(
            "all {} hyperparameter restarts failed",
            starts.len()
        ))),
    }
}

fn move_inward(theta: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..theta.len() {
        if lo[i].is_finite() && hi[i].is_finite() {
            let margin = INWARD_MARGIN * (hi[i] - lo[i]);
            theta[i] = theta[i].clamp(lo[i] + margin, hi[i] - margin);
        }
    }
}

fn support(priors: &HyperPriors, dims: usize) -> (Vec<f64>, Vec<f64>) {
    priors.expand(dims).iter().map(|p| p.bounds()).unzip()
}

/// Maximum a-posteriori hyperparameters by multi-start quasi-Newton ascent.
///
/// With `warm_start`, the first restart begins there and the remaining
/// `restarts - 1` begin at random points of the prior support.
pub fn map_estimate<R: Rng + ?Sized>(
    data: &Dataset,
    priors: &HyperPriors,
    restarts: usize,
    warm_start: Option<&MaternHyperparams>,
    rng: &mut R,
) -> Result<MapEstimate> {
    check_inputs(data, priors, restarts)?;
    let (lo, hi) = support(priors, data.dims());
    let starts = starts(data, priors, restarts, warm_start, rng);
    let (mut theta, _, ok, conv) = run_restarts(starts, &lo, &hi, |t| log_posterior_with_grad(data, priors, t))?;
    move_inward(&mut theta, &lo, &hi);
    let log_posterior = log_posterior_with_grad(data, priors, &theta)?.0;
    Ok(MapEstimate {
        hyper: MaternHyperparams::from_log_vector(&theta, priors.ard)?,
        log_posterior,
        theta,
        restarts_succeeded: ok,
        restarts_converged: conv,
    })
}

/// Unpenalized maximum-likelihood estimate over the same box and starts
/// that [`map_estimate`] would use.
pub fn mle_estimate<R: Rng + ?Sized>(
    data: &Dataset,
    priors: &HyperPriors,
    restarts: usize,
    warm_start: Option<&MaternHyperparams>,
    rng: &mut R,
) -> Result<MapEstimate> {
    check_inputs(data, priors, restarts)?;
    let (lo, hi) = support(priors, data.dims());
    let starts = starts(data, priors, restarts, warm_start, rng);
    let (mut theta, _, ok, conv) = run_restarts(starts, &lo, &hi, |t| log_likelihood_with_grad(data, priors.ard, t))?;
    move_inward(&mut theta, &lo, &hi);
    let log_posterior = log_likelihood_with_grad(data, priors.ard, &theta)?.0;
    Ok(MapEstimate {
        hyper: MaternHyperparams::from_log_vector(&theta, priors.ard)?,
        log_posterior,
        theta,
        restarts_succeeded: ok,
        restarts_converged: conv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::ParamPrior;
    use crate::rng::stream;

    fn toy_data() -> Dataset {
        let xs: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 / 14.0]).collect();
        let fs: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (6.0 * x[0]).sin() + 0.8 * (((i * 7919) % 13) as f64 / 13.0 - 0.5))
            .collect();
        Dataset::from_rows(1, xs, fs).unwrap()
    }

    fn priors() -> HyperPriors {
        HyperPriors {
            noise_var: ParamPrior::Uniform { lo: -9.0, hi: 2.0 },
            amplitude: ParamPrior::Uniform { lo: -4.0, hi: 4.0 },
            length_scale: ParamPrior::Uniform { lo: -4.0, hi: 2.0 },
            mean: ParamPrior::Uniform { lo: -10.0, hi: 10.0 },
            ard: false,
        }
    }

    #[test]
    fn estimate_stays_inside_support() {
        let d = toy_data();
        let pr = priors();
        let est = map_estimate(&d, &pr, 4, None, &mut stream(1, &[])).unwrap();
        for (v, p) in est.theta.iter().zip(pr.expand(1)) {
            let (lo, hi) = p.bounds();
            assert!(*v > lo && *v < hi);
        }
    }

    #[test]
    fn more_restarts_never_worse() {
        let d = toy_data();
        let pr = priors();
        let one = map_estimate(&d, &pr, 1, None, &mut stream(5, &[])).unwrap();
        let ten = map_estimate(&d, &pr, 10, None, &mut stream(5, &[])).unwrap();
        assert!(ten.log_posterior >= one.log_posterior - 1e-9);
    }

    #[test]
    fn stationary_point_has_small_gradient() {
        let d = toy_data();
        let pr = priors();
        let est = map_estimate(&d, &pr, 3, None, &mut stream(2, &[])).unwrap();
        let (_, g) = log_posterior_with_grad(&d, &pr, &est.theta).unwrap();
        let pinned = crate::hyper::pinned_parameters(&pr, 1, &est.theta);
        assert!(pinned.iter().all(|p| !p), "optimum should be interior: {:?}", est.theta);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-5, "gradient norm {norm} at {:?}", est.theta);
    }

    #[test]
    fn zero_restarts_rejected() {
        assert!(map_estimate(&toy_data(), &priors(), 0, None, &mut stream(0, &[])).is_err());
    }
}
