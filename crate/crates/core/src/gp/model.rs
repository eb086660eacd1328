//! Dense GP regression on a Cholesky-factored Gram matrix.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kernel::{matern_from_scaled, scaled_distance, LengthScale, MaternHyperparams};
use crate::error::{Error, Result};

/// Jitter rungs as multiples of the kernel amplitude, tried in order after
/// an unjittered attempt fails.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Largest grid for which a joint posterior draw will be attempted.
pub const MAX_JOINT_GRID: usize = 5000;

/// Observed locations (unit-cube coordinates) and their noisy values.
///
/// Repeated evaluations at one location are separate rows; nothing here
/// ever averages them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    dims: usize,
    x: Vec<Vec<f64>>,
    f: Vec<f64>,
}

impl Dataset {
    pub fn new(dims: usize) -> Self {
        Dataset {
            dims,
            x: Vec::new(),
            f: Vec::new(),
        }
    }

    pub fn from_rows(dims: usize, x: Vec<Vec<f64>>, f: Vec<f64>) -> Result<Self> {
        if x.len() != f.len() {
            return Err(Error::arg(format!("{} inputs but {} targets", x.len(), f.len())));
        }
        let mut d = Dataset::new(dims);
        for (xi, fi) in x.into_iter().zip(f) {
            d.push(xi, fi)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, x: Vec<f64>, f: f64) -> Result<()> {
        if x.len() != self.dims {
            return Err(Error::arg(format!(
                "row has {} coordinates, dataset has {}",
                x.len(),
                self.dims
            )));
        }
        if !f.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("dataset rows must be finite"));
        }
        self.x.push(x);
        self.f.push(f);
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// Index and value of the smallest observation.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.f
            .iter()
            .copied()
            .enumerate()
            .fold(None, |acc, (i, v)| match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((i, v)),
            })
    }

    pub fn mean(&self) -> f64 {
        if self.f.is_empty() {
            0.0
        } else {
            self.f.iter().sum::<f64>() / self.f.len() as f64
        }
    }
}

/// Which variance a posterior query reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceKind {
    /// Variance of the latent function value.
    #[default]
    Latent,
    /// Latent variance plus the noise variance (a new observation).
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A fitted GP. Immutable; conditioning returns a new model.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: Dataset,
    /// Noise-free pseudo-observations appended after the real data.
    fantasy_x: Vec<Vec<f64>>,
    fantasy_y: Vec<f64>,
    hyper: MaternHyperparams,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

fn gram(rows: &[&[f64]], noisy: usize, hyper: &MaternHyperparams) -> DMatrix<f64> {
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = hyper.amplitude;
        for i in (j + 1)..n {
            let v = matern_from_scaled(
                hyper.amplitude,
                scaled_distance(rows[i], rows[j], &hyper.length_scale),
            );
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for i in 0..noisy {
        k[(i, i)] += hyper.noise_var;
    }
    k
}

/// Cholesky with the escalating jitter ladder. Returns the factor and the
/// jitter that was added to the diagonal.
pub(crate) fn factor_with_jitter(
    k: &DMatrix<f64>,
    amplitude: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let attempt = |jitter: f64| {
        let mut m = k.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        Cholesky::new(m).filter(|c| {
            let l = c.l_dirty();
            (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0)
        })
    };
    if let Some(c) = attempt(0.0) {
        return Ok((c, 0.0));
    }
    let mut tried = vec![0.0];
    for factor in JITTER_LADDER {
        let jitter = factor * amplitude;
        tried.push(jitter);
        if let Some(c) = attempt(jitter) {
            return Ok((c, jitter));
        }
    }
    Err(Error::Factorization { ladder: tried })
}

/// Solves `L v = b` in place, reading only the lower triangle of `l`.
fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for j in 0..n {
        let col = l.column(j);
        let vj = b[j] / col[j];
        b[j] = vj;
        for i in (j + 1)..n {
            b[i] -= col[i] * vj;
        }
    }
}

impl GpModel {
    /// Fits the GP to `data` with fixed hyperparameters.
    pub fn fit(data: &Dataset, hyper: &MaternHyperparams) -> Result<GpModel> {
        Self::build(data.clone(), Vec::new(), Vec::new(), hyper.clone())
    }

    fn build(
        data: Dataset,
        fantasy_x: Vec<Vec<f64>>,
        fantasy_y: Vec<f64>,
        hyper: MaternHyperparams,
    ) -> Result<GpModel> {
        if data.is_empty() {
            return Err(Error::arg("cannot fit a GP to an empty dataset"));
        }
        hyper.validate(Some(data.dims()))?;
        let rows: Vec<&[f64]> = data
            .x()
            .iter()
            .chain(&fantasy_x)
            .map(|r| r.as_slice())
            .collect();
        let k = gram(&rows, data.len(), &hyper);
        let (chol, jitter) = factor_with_jitter(&k, hyper.amplitude)?;
        let resid = DVector::from_iterator(
            rows.len(),
            data.f().iter().chain(&fantasy_y).map(|y| y - hyper.mean),
        );
        let alpha = chol.solve(&resid);
        Ok(GpModel {
            data,
            fantasy_x,
            fantasy_y,
            hyper,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn hyper(&self) -> &MaternHyperparams {
        &self.hyper
    }

    pub fn dims(&self) -> usize {
        self.data.dims()
    }

    /// Diagonal jitter that the factorization needed (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn fantasy_count(&self) -> usize {
        self.fantasy_x.len()
    }

    fn rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.data.x().iter().chain(&self.fantasy_x)
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        let h = &self.hyper;
        self.rows()
            .map(|r| matern_from_scaled(h.amplitude, scaled_distance(r, x, &h.length_scale)))
            .collect()
    }

    /// Posterior mean and variance at a unit-cube point.
    pub fn posterior(&self, x: &[f64], kind: VarianceKind) -> Prediction {
        debug_assert_eq!(x.len(), self.dims());
        let mut k = self.cross(x);
        let mean = self.hyper.mean + k.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();
        forward_solve(self.chol.l_dirty(), &mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        let mut variance = (self.hyper.amplitude - explained).max(0.0);
        if kind == VarianceKind::Observed {
            variance += self.hyper.noise_var;
        }
        Prediction { mean, variance }
    }

    /// Latent-function posterior, the common case.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        self.posterior(x, VarianceKind::Latent)
    }

    /// Posterior mean only; skips the triangular solve.
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let k = self.cross(x);
        self.hyper.mean + k.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `log N(f; μ0·1, K_f)` for the real observations.
    pub fn log_marginal_likelihood(&self) -> f64 {
        debug_assert!(self.fantasy_x.is_empty());
        let n = self.alpha.len();
        let fit: f64 = self
            .data
            .f()
            .iter()
            .zip(self.alpha.iter())
            .map(|(f, a)| (f - self.hyper.mean) * a)
            .sum();
        let l = self.chol.l_dirty();
        let log_det: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        -0.5 * fit - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Gradient of the log marginal likelihood over the log-parameter vector
    /// `[ln σn², ln σ0, ln ℓ.., μ0]`, via `½ tr((ααᵀ − K⁻¹) ∂K)`.
    pub fn log_marginal_likelihood_grad(&self) -> Vec<f64> {
        debug_assert!(self.fantasy_x.is_empty());
        let h = &self.hyper;
        let n = self.alpha.len();
        let kinv = self.chol.inverse();
        let a = &self.alpha;
        let w = |i: usize, j: usize| a[i] * a[j] - kinv[(i, j)];
        let n_ls = h.length_scale.len();
        let mut g = vec![0.0; 3 + n_ls];

        // Diagonal terms: ∂K/∂ln σ0 = σ0, length-scale derivatives vanish.
        let trace_w: f64 = (0..n).map(|i| w(i, i)).sum();
        g[0] = 0.5 * h.noise_var * trace_w;
        g[1] = 0.5 * h.amplitude * trace_w;

        let x = self.data.x();
        let mut ls_acc = vec![0.0; n_ls];
        for j in 0..n {
            for i in (j + 1)..n {
                let wij = w(i, j);
                let s = scaled_distance(&x[i], &x[j], &h.length_scale);
                let e = (-s).exp();
                // Off-diagonal entries appear twice in the symmetric trace.
                g[1] += wij * h.amplitude * (1.0 + s) * e;
                match &h.length_scale {
                    LengthScale::Isotropic(_) => ls_acc[0] += wij * h.amplitude * s * s * e,
                    LengthScale::Ard(ls) => {
                        for (k, l) in ls.iter().enumerate() {
                            let u = (x[i][k] - x[j][k]) / l;
                            ls_acc[k] += wij * 3.0 * h.amplitude * u * u * e;
                        }
                    }
                }
            }
        }
        g[2..2 + n_ls].copy_from_slice(&ls_acc);
        g[2 + n_ls] = a.iter().sum();
        g
    }

    /// Posterior mean vector and covariance matrix over a set of points.
    pub fn joint_posterior(&self, grid: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let g = grid.len();
        if g > MAX_JOINT_GRID {
            return Err(Error::Resource(format!(
                "joint posterior over {g} points exceeds the cap of {MAX_JOINT_GRID}"
            )));
        }
        let n = self.alpha.len();
        let h = &self.hyper;
        let mut kxg = DMatrix::zeros(n, g);
        for (c, p) in grid.iter().enumerate() {
            for (r, row) in self.rows().enumerate() {
                kxg[(r, c)] = matern_from_scaled(h.amplitude, scaled_distance(row, p, &h.length_scale));
            }
        }
        let mean: Vec<f64> = (0..g)
            .map(|c| h.mean + kxg.column(c).dot(&self.alpha))
            .collect();
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kxg)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let grid_rows: Vec<&[f64]> = grid.iter().map(|p| p.as_slice()).collect();
        let mut cov = gram(&grid_rows, 0, h);
        cov -= v.tr_mul(&v);
        Ok((mean, cov))
    }

    /// One draw from the joint posterior over `grid`.
    pub fn sample_function<R: Rng + ?Sized>(&self, grid: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        let (mean, cov) = self.joint_posterior(grid)?;
        let (chol, _) = factor_with_jitter(&cov, self.hyper.amplitude)?;
        let z = DVector::from_iterator(grid.len(), (0..grid.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let l = chol.l();
        let draw = l * z;
        Ok(mean.iter().zip(draw.iter()).map(|(m, d)| m + d).collect())
    }

    /// Conditions the covariance on noise-free pseudo-observations placed at
    /// the current posterior mean. The mean surface is unchanged in exact
    /// arithmetic; variance collapses at the new points.
    pub fn condition_on_mean(&self, points: &[Vec<f64>]) -> Result<GpModel> {
        let mut fx = self.fantasy_x.clone();
        let mut fy = self.fantasy_y.clone();
        for p in points {
            fy.push(self.predict_mean(p));
            fx.push(p.clone());
        }
        Self::build(self.data.clone(), fx, fy, self.hyper.clone())
    }
}

/// Log marginal likelihood of `data` under `hyper`.
pub fn log_marginal_likelihood(data: &Dataset, hyper: &MaternHyperparams) -> Result<f64> {
    Ok(GpModel::fit(data, hyper)?.log_marginal_likelihood())
}

/// Log marginal likelihood and its gradient from one factorization.
pub fn log_marginal_likelihood_with_grad(
    data: &Dataset,
    hyper: &MaternHyperparams,
) -> Result<(f64, Vec<f64>)> {
    let m = GpModel::fit(data, hyper)?;
    Ok((m.log_marginal_likelihood(), m.log_marginal_likelihood_grad()))
}

pub fn log_marginal_likelihood_grad(data: &Dataset, hyper: &MaternHyperparams) -> Result<Vec<f64>> {
    Ok(GpModel::fit(data, hyper)?.log_marginal_likelihood_grad())
}
