//! Acquisition functions and batch selectors.
//!
//! The engine minimizes the objective, so every acquisition here is
//! oriented so that larger values mark more desirable samples. All
//! selectors work in unit-cube coordinates, the space the surrogate is
//! fitted in.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::direct::{direct_maximize, DirectBudget};
use crate::error::{Error, Result};
use crate::space::unit_latin_hypercube;
use crate::surrogate::Surrogate;

/// Points closer than this (max-norm, unit coordinates) count as the same
/// location when a batch must be pairwise distinct.
pub const DISTINCT_TOL: f64 = 1e-9;

/// Default confidence-bound weight.
pub const DEFAULT_BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionFamily {
    Ei,
    Ucb,
    Ts,
}

impl AcquisitionFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            AcquisitionFamily::Ei => "ei",
            AcquisitionFamily::Ucb => "ucb",
            AcquisitionFamily::Ts => "ts",
        }
    }
}

impl std::fmt::Display for AcquisitionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AcquisitionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(AcquisitionFamily::Ei),
            "ucb" => Ok(AcquisitionFamily::Ucb),
            "ts" => Ok(AcquisitionFamily::Ts),
            other => Err(Error::arg(format!("unknown acquisition family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaSchedule {
    /// `β_t = √(2 ln(d t² π² / 0.6))`.
    Schedule,
}

/// Confidence-bound weight: a constant or the iteration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Constant(f64),
    Named(BetaSchedule),
}

impl Default for Beta {
    fn default() -> Self {
        Beta::Constant(DEFAULT_BETA)
    }
}

impl Beta {
    /// Weight at 1-based iteration `t` in `dims` dimensions.
    pub fn at(&self, dims: usize, t: usize) -> f64 {
        match *self {
            Beta::Constant(b) => b,
            Beta::Named(BetaSchedule::Schedule) => beta_schedule(dims, t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Beta::Constant(b) if !(b > 0.0 && b.is_finite()) => {
                Err(Error::arg(format!("UCB beta must be positive, got {b}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn beta_schedule(dims: usize, t: usize) -> f64 {
    let t = t.max(1) as f64;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    (2.0 * (dims as f64 * t * t * pi2 / (6.0 * 0.1)).ln()).sqrt()
}

/// Candidate grid size for Thompson draws: `min(1000·d, 4000)`.
pub fn default_ts_grid(dims: usize) -> usize {
    (1000 * dims).min(4000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub family: AcquisitionFamily,
    pub batch_size: usize,
    #[serde(default)]
    pub beta: Beta,
    /// Defaults to [`default_ts_grid`].
    #[serde(default)]
    pub ts_grid_size: Option<usize>,
    /// Defaults to [`DirectBudget::for_dims`].
    #[serde(default)]
    pub direct: Option<DirectBudget>,
}

impl AcquisitionSpec {
    pub fn new(family: AcquisitionFamily, batch_size: usize) -> Self {
        AcquisitionSpec {
            family,
            batch_size,
            beta: Beta::default(),
            ts_grid_size: None,
            direct: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if self.ts_grid_size == Some(0) {
            return Err(Error::arg("Thompson grid size must be at least 1"));
        }
        self.beta.validate()
    }

    pub fn grid_size(&self, dims: usize) -> usize {
        self.ts_grid_size.unwrap_or_else(|| default_ts_grid(dims))
    }

    pub fn direct_budget(&self, dims: usize) -> DirectBudget {
        self.direct.unwrap_or_else(|| DirectBudget::for_dims(dims))
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Closed-form expected improvement below `y_best` for `Y ~ N(mean, sd²)`.
pub fn ei_closed_form(mean: f64, sd: f64, y_best: f64) -> f64 {
    let gap = y_best - mean;
    if !(sd > 0.0) {
        return gap.max(0.0);
    }
    let z = gap / sd;
    let n = std_normal();
    (gap * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

pub fn expected_improvement<S: Surrogate>(model: &S, x: &[f64], y_best: f64) -> f64 {
    let p = model.predict(x);
    ei_closed_form(p.mean, p.sd(), y_best)
}

/// Lower confidence bound, negated: `−μ + β·σ`.
pub fn ucb_closed_form(mean: f64, sd: f64, beta: f64) -> f64 {
    -mean + beta * sd
}

pub fn ucb_acquisition<S: Surrogate>(model: &S, x: &[f64], beta: f64) -> f64 {
    let p = model.predict(x);
    ucb_closed_form(p.mean, p.sd(), beta)
}

fn near_any(x: &[f64], taken: &[Vec<f64>]) -> bool {
    taken
        .iter()
        .any(|t| t.iter().zip(x).all(|(a, b)| (a - b).abs() <= DISTINCT_TOL))
}

fn maximize_excluding<F>(f: F, dims: usize, taken: &[Vec<f64>], budget: &DirectBudget) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let res = direct_maximize(
        |x: &[f64]| if near_any(x, taken) { f64::NEG_INFINITY } else { f(x) },
        dims,
        budget,
    )?;
    if !res.best_value.is_finite() || near_any(&res.best_x, taken) {
        return Err(Error::Numerical(
            "acquisition maximization found no admissible point".into(),
        ));
    }
    Ok(res.best_x)
}

/// DIRECT argmax of expected improvement.
pub fn select_ei<S: Surrogate>(model: &S, y_best: f64, budget: &DirectBudget) -> Result<Vec<f64>> {
    maximize_excluding(|x| expected_improvement(model, x, y_best), model.dims(), &[], budget)
}

/// DIRECT argmax of the confidence bound.
pub fn select_ucb<S: Surrogate>(model: &S, beta: f64, budget: &DirectBudget) -> Result<Vec<f64>> {
    maximize_excluding(|x| ucb_acquisition(model, x, beta), model.dims(), &[], budget)
}

/// One joint posterior draw over a fresh Latin-hypercube grid; returns the
/// grid point minimizing the draw.
pub fn thompson_select<S: Surrogate, R: Rng + ?Sized>(model: &S, grid_size: usize, rng: &mut R) -> Result<Vec<f64>> {
    let grid = unit_latin_hypercube(model.dims(), grid_size, rng)?.into_points();
    let draw = model.sample_function(&grid, rng)?;
    let best = draw
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < draw[b] { i } else { b });
    Ok(grid[best].clone())
}

/// Greedy GP-UCB-PE batch. Later points maximize the bound under a model
/// whose covariance has been conditioned on the earlier selections.
pub fn select_batch_ucb_pe<S: Surrogate>(
    model: &S,
    q: usize,
    beta: f64,
    budget: &DirectBudget,
) -> Result<Vec<Vec<f64>>> {
    check_q(q)?;
    let mut picks = vec![select_ucb(model, beta, budget)?];
    while picks.len() < q {
        let cond = model.condition_on_mean(&picks)?;
        let x = maximize_excluding(|x| ucb_acquisition(&cond, x, beta), model.dims(), &picks, budget)?;
        picks.push(x);
    }
    Ok(picks)
}

/// Greedy q-EI with posterior-mean fantasies ("kriging believer"). Each
/// fantasy also lowers `y_best` if it beats it.
pub fn select_batch_qei<S: Surrogate>(
    model: &S,
    q: usize,
    y_best: f64,
    budget: &DirectBudget,
) -> Result<Vec<Vec<f64>>> {
    check_q(q)?;
    let first = select_ei(model, y_best, budget)?;
    let mut best = y_best.min(model.predict(&first).mean);
    let mut picks = vec![first];
    while picks.len() < q {
        let cond = model.condition_on_mean(&picks)?;
        let x = maximize_excluding(|x| expected_improvement(&cond, x, best), model.dims(), &picks, budget)?;
        best = best.min(cond.predict(&x).mean);
        picks.push(x);
    }
    Ok(picks)
}

/// `q` independent Thompson draws; coincident minimizers are kept.
pub fn select_batch_thompson<S: Surrogate, R: Rng + ?Sized>(
    model: &S,
    q: usize,
    grid_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_q(q)?;
    (0..q).map(|_| thompson_select(model, grid_size, rng)).collect()
}

fn check_q(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    Ok(())
}

/// Dispatches to the serial selector for a batch of one and to the
/// matching batch selector otherwise. `iteration` is 1-based and only
/// matters for a scheduled β.
pub fn select<S: Surrogate, R: Rng + ?Sized>(
    model: &S,
    spec: &AcquisitionSpec,
    y_best: f64,
    iteration: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let dims = model.dims();
    let budget = spec.direct_budget(dims);
    let beta = spec.beta.at(dims, iteration);
    let q = spec.batch_size;
    match (spec.family, q) {
        (AcquisitionFamily::Ei, 1) => Ok(vec![select_ei(model, y_best, &budget)?]),
        (AcquisitionFamily::Ucb, 1) => Ok(vec![select_ucb(model, beta, &budget)?]),
        (AcquisitionFamily::Ts, 1) => Ok(vec![thompson_select(model, spec.grid_size(dims), rng)?]),
        (AcquisitionFamily::Ei, _) => select_batch_qei(model, q, y_best, &budget),
        (AcquisitionFamily::Ucb, _) => select_batch_ucb_pe(model, q, beta, &budget),
        (AcquisitionFamily::Ts, _) => select_batch_thompson(model, q, spec.grid_size(dims), rng),
    }
}

/// Acquisition value at `x` for the deterministic families; Thompson
/// sampling has no pointwise surface and yields `None`.
pub fn acquisition_value<S: Surrogate>(
    model: &S,
    spec: &AcquisitionSpec,
    x: &[f64],
    y_best: f64,
    iteration: usize,
) -> Option<f64> {
    match spec.family {
        AcquisitionFamily::Ei => Some(expected_improvement(model, x, y_best)),
        AcquisitionFamily::Ucb => Some(ucb_acquisition(model, x, spec.beta.at(model.dims(), iteration))),
        AcquisitionFamily::Ts => None,
    }
}
