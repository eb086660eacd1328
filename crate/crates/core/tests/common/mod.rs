//! Independent reference implementations used as test oracles. Nothing here
//! calls into the factored GP code paths under test.

#![allow(dead_code)]

use hrmsbo_core::gp::LengthScale;
use hrmsbo_core::hyper::{HyperPriors, ParamPrior};
use hrmsbo_core::rng::stream;
use hrmsbo_core::{Dataset, MaternHyperparams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn matern32(a: &[f64], b: &[f64], h: &MaternHyperparams) -> f64 {
    let scales: Vec<f64> = match &h.length_scale {
        LengthScale::Isotropic(l) => vec![*l; a.len()],
        LengthScale::Ard(v) => v.clone(),
    };
    let r = a
        .iter()
        .zip(b)
        .zip(&scales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum::<f64>()
        .sqrt();
    let s = 3f64.sqrt() * r;
    h.amplitude * (1.0 + s) * (-s).exp()
}

pub struct Dense {
    pub kinv: DMatrix<f64>,
    pub resid: DVector<f64>,
    pub logdet: f64,
}

/// Gram matrix with noise, its explicit inverse and log-determinant.
pub fn dense(data: &Dataset, h: &MaternHyperparams) -> Dense {
    let n = data.len();
    let x = data.x();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern32(&x[i], &x[j], h) + if i == j { h.noise_var } else { 0.0 }
    });
    let logdet = k.determinant().ln();
    let kinv = k.try_inverse().expect("invertible Gram");
    let resid = DVector::from_iterator(n, data.f().iter().map(|f| f - h.mean));
    Dense { kinv, resid, logdet }
}

/// Latent posterior mean and variance from the textbook formulas.
pub fn dense_posterior(data: &Dataset, h: &MaternHyperparams, xs: &[f64]) -> (f64, f64) {
    let d = dense(data, h);
    let ks = DVector::from_iterator(data.len(), data.x().iter().map(|x| matern32(x, xs, h)));
    let mean = h.mean + (ks.transpose() * &d.kinv * &d.resid)[(0, 0)];
    let var = h.amplitude - (ks.transpose() * &d.kinv * &ks)[(0, 0)];
    (mean, var.max(0.0))
}

pub fn dense_lml(data: &Dataset, h: &MaternHyperparams) -> f64 {
    let d = dense(data, h);
    let quad = (d.resid.transpose() * &d.kinv * &d.resid)[(0, 0)];
    let n = data.len() as f64;
    -0.5 * quad - 0.5 * d.logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

pub fn random_hyper<R: Rng>(rng: &mut R, dims: usize, ard: bool) -> MaternHyperparams {
    let noise = 10f64.powf(rng.random_range(-3.0..-0.5));
    let amp = rng.random_range(0.5..2.0);
    let mean = rng.random_range(-1.0..1.0);
    if ard {
        let ls = (0..dims).map(|_| rng.random_range(0.15..1.0)).collect();
        MaternHyperparams::ard(noise, amp, ls, mean).unwrap()
    } else {
        MaternHyperparams::isotropic(noise, amp, rng.random_range(0.15..1.0), mean).unwrap()
    }
}

pub fn random_dataset<R: Rng>(rng: &mut R, dims: usize, n: usize) -> Dataset {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect();
    let f = x
        .iter()
        .map(|p| p.iter().map(|v| (4.0 * v).sin()).sum::<f64>() + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::from_rows(dims, x, f).unwrap()
}

/// One joint draw of noisy observations from a GP prior at `x`.
pub fn draw_gp<R: Rng>(rng: &mut R, x: &[Vec<f64>], h: &MaternHyperparams) -> Vec<f64> {
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern32(&x[i], &x[j], h) + if i == j { h.noise_var + 1e-10 } else { 0.0 }
    });
    let l = k.cholesky().expect("PD prior covariance").l();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    (l * z).iter().map(|v| v + h.mean).collect()
}

/// Independent latent draw plus `repeats` noisy observations per location.
pub fn draw_latent_then_noise<R: Rng>(
    rng: &mut R,
    x: &[Vec<f64>],
    h: &MaternHyperparams,
    repeats: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let latent = {
        let mut noiseless = h.clone();
        noiseless.noise_var = 0.0;
        draw_gp(rng, x, &noiseless)
    };
    let sd = h.noise_var.sqrt();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (p, f) in x.iter().zip(&latent) {
        for _ in 0..repeats {
            xs.push(p.clone());
            ys.push(f + sd * rng.sample::<f64, _>(StandardNormal));
        }
    }
    (xs, ys)
}

/// Log-uniform priors wide enough for unit-scale synthetic data.
pub fn broad_priors() -> HyperPriors {
    HyperPriors {
        noise_var: ParamPrior::Uniform { lo: (1e-4f64).ln(), hi: (10f64).ln() },
        amplitude: ParamPrior::Uniform { lo: -3.0, hi: 3.0 },
        length_scale: ParamPrior::Uniform { lo: (0.03f64).ln(), hi: (3f64).ln() },
        mean: ParamPrior::Gaussian { mean: 0.0, var: 4.0 },
        ard: false,
    }
}

pub fn rng(seed: u64) -> hrmsbo_core::rng::StreamRng {
    stream(seed, &[])
}

/// Relative error with the larger magnitude (floored at `floor`) as scale.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
