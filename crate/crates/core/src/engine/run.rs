use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::history::{Evaluation, IterationRecord, RunHistory, RunMeta, RunStatus};
use super::plan::{check_termination, Progress, SamplingPlan, TerminationCriteria};
use crate::acquisition;
use crate::direct::{direct_maximize, DirectBudget};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel, MaternHyperparams, Prediction};
use crate::hyper::{laplace_covariance, map_estimate, marginalized_model, HyperPriors, MixtureModel};
use crate::objectives::NoisyObjective;
use crate::rng::{derive_seed, label, stream};
use crate::space::{latin_hypercube, SearchSpace};
use crate::surrogate::Surrogate;

pub const DEFAULT_RESTARTS: usize = 10;

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub plan: SamplingPlan,
    pub seed_design_size: usize,
    pub priors: HyperPriors,
    pub termination: TerminationCriteria,
    /// MAP restarts per refit: one warm start from the previous estimate
    /// plus `restarts - 1` fresh ones.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Acquire on the sigma-point mixture instead of the plain MAP model.
    #[serde(default = "yes")]
    pub marginalize: bool,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.termination.validate()?;
        self.priors.validate()?;
        if self.seed_design_size == 0 {
            return Err(Error::arg("seed design needs at least one point"));
        }
        if self.restarts == 0 {
            return Err(Error::arg("restarts must be at least 1"));
        }
        Ok(())
    }
}

/// The surface acquisitions run on: either the MAP model or its
/// hyperparameter-marginalized mixture.
#[derive(Debug, Clone)]
pub enum Posterior {
    Map(GpModel),
    Mixture(MixtureModel),
}

impl Surrogate for Posterior {
    fn dims(&self) -> usize {
        match self {
            Posterior::Map(m) => Surrogate::dims(m),
            Posterior::Mixture(m) => m.dims(),
        }
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            Posterior::Map(m) => Surrogate::predict(m, x),
            Posterior::Mixture(m) => m.predict(x),
        }
    }

    fn condition_on_mean(&self, points: &[Vec<f64>]) -> Result<Self> {
        Ok(match self {
            Posterior::Map(m) => Posterior::Map(Surrogate::condition_on_mean(m, points)?),
            Posterior::Mixture(m) => Posterior::Mixture(m.condition_on_mean(points)?),
        })
    }

    fn sample_function<R: Rng + ?Sized>(&self, grid: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Posterior::Map(m) => Surrogate::sample_function(m, grid, rng),
            Posterior::Mixture(m) => m.sample_function(grid, rng),
        }
    }
}

/// A refit: MAP model, the surface to acquire on, and the log-parameters.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: GpModel,
    pub posterior: Posterior,
    pub theta: Vec<f64>,
}

/// MAP estimate, then (optionally) Laplace covariance and sigma-point
/// mixture.
pub fn fit_surrogate<R: Rng + ?Sized>(
    data: &Dataset,
    priors: &HyperPriors,
    restarts: usize,
    warm_start: Option<&MaternHyperparams>,
    marginalize: bool,
    rng: &mut R,
) -> Result<Fitted> {
    let est = map_estimate(data, priors, restarts, warm_start, rng)?;
    let model = GpModel::fit(data, &est.hyper)?;
    let posterior = if marginalize {
        let lap = laplace_covariance(data, priors, &est.hyper)?;
        Posterior::Mixture(marginalized_model(&model, &lap, priors)?)
    } else {
        Posterior::Map(model.clone())
    };
    Ok(Fitted {
        model,
        posterior,
        theta: est.theta,
    })
}

/// Proposes the iteration's `m` locations in native coordinates.
/// `iteration` is 1-based.
pub fn propose_points<S: Surrogate, R: Rng + ?Sized>(
    model: &S,
    plan: &SamplingPlan,
    space: &SearchSpace,
    y_best: f64,
    iteration: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    acquisition::select(model, &plan.acquisition, y_best, iteration, rng)?
        .iter()
        .map(|u| space.from_unit(u))
        .collect()
}

/// Noise stream for one evaluation, independent of evaluation order.
pub fn evaluation_stream(seed: u64, iteration: usize, point: usize, repeat: usize) -> u64 {
    derive_seed(seed, &[label("evaluate"), iteration as u64, point as u64, repeat as u64])
}

fn evaluate_all(
    objective: &dyn NoisyObjective,
    points: &[Vec<f64>],
    repeats: usize,
    seed: u64,
    iteration: usize,
) -> Result<Vec<Evaluation>> {
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..repeats).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<Evaluation>> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let y = objective.evaluate(&points[p], evaluation_stream(seed, iteration, p, r))?;
            if !y.is_finite() {
                return Err(Error::Objective(format!("non-finite value {y} at {:?}", points[p])));
            }
            Ok(Evaluation {
                point: p,
                repeat: r,
                x: points[p].clone(),
                y,
            })
        })
        .collect();
    results.into_iter().collect()
}

struct State<'a> {
    objective: &'a dyn NoisyObjective,
    config: &'a EngineConfig,
    seed: u64,
    data: Dataset,
    incumbent: (Vec<f64>, f64),
    incumbents: Vec<(Vec<f64>, f64)>,
    started: Instant,
}

impl State<'_> {
    fn absorb(&mut self, evals: &[Evaluation]) -> Result<()> {
        let space = self.objective.space();
        for e in evals {
            self.data.push(space.to_unit(&e.x)?, e.y)?;
            if e.y < self.incumbent.1 {
                self.incumbent = (e.x.clone(), e.y);
            }
        }
        self.incumbents.push(self.incumbent.clone());
        Ok(())
    }

    fn refit(&self, iteration: usize, warm: Option<&MaternHyperparams>) -> Result<Fitted> {
        let mut rng = stream(self.seed, &[label("hyper"), iteration as u64]);
        let c = self.config;
        fit_surrogate(&self.data, &c.priors, c.restarts, warm, c.marginalize, &mut rng)
    }

    fn record(&self, iteration: usize, proposed: Vec<Vec<f64>>, evaluations: Vec<Evaluation>, theta: Vec<f64>) -> IterationRecord {
        IterationRecord {
            iteration,
            proposed,
            evaluations,
            theta,
            incumbent_x: self.incumbent.0.clone(),
            incumbent_y: self.incumbent.1,
            evaluations_total: self.data.len(),
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// Runs the optimization loop: Latin-hypercube seed design, MAP fit, then
/// propose / evaluate / refit until a termination criterion holds.
///
/// Objective or numerical failures do not return `Err`; the history keeps
/// every completed iteration and its status is set to failed. `Err` is
/// reserved for invalid configuration.
pub fn run_gpbo(objective: &dyn NoisyObjective, config: &EngineConfig, seed: u64) -> Result<RunHistory> {
    config.validate()?;
    let space = objective.space();
    let dims = space.dims();
    let param_names = MaternHyperparams::param_names_for(dims, config.priors.ard);
    let mut history = RunHistory {
        meta: RunMeta {
            objective: objective.name().to_string(),
            space: space.clone(),
            plan: config.plan.clone(),
            seed,
            ard: config.priors.ard,
            param_names,
            status: RunStatus::Running,
            final_hyper: None,
            model_minimizer: None,
        },
        records: Vec::new(),
    };
    let mut state = State {
        objective,
        config,
        seed,
        data: Dataset::new(dims),
        incumbent: (Vec::new(), f64::INFINITY),
        incumbents: Vec::new(),
        started: Instant::now(),
    };
    let outcome = drive(&mut state, &mut history);
    history.meta.status = match outcome {
        Ok(reason) => RunStatus::Completed { reason },
        Err(e) => RunStatus::Failed { message: e.to_string() },
    };
    Ok(history)
}

fn drive(state: &mut State<'_>, history: &mut RunHistory) -> Result<super::plan::StopReason> {
    let config = state.config;
    let space = state.objective.space();
    let seed = state.seed;

    let design = latin_hypercube(space, config.seed_design_size, &mut stream(seed, &[label("seed_design")]))?;
    let seeds = design.into_points();
    let evals = evaluate_all(state.objective, &seeds, 1, seed, 0)?;
    state.absorb(&evals)?;
    let mut fitted = state.refit(0, None)?;
    history.records.push(state.record(0, seeds, evals, fitted.theta.clone()));
    history.meta.final_hyper = Some(fitted.model.hyper().clone());

    let mut iteration = 0usize;
    let reason = loop {
        let progress = Progress {
            evaluations: state.data.len(),
            iterations: iteration,
            elapsed_seconds: state.started.elapsed().as_secs_f64(),
            incumbents: &state.incumbents,
        };
        if let Some(reason) = check_termination(&progress, &config.termination) {
            break reason;
        }
        iteration += 1;
        let y_best = state.incumbent.1;
        let mut rng = stream(seed, &[label("acquire"), iteration as u64]);
        let proposed = propose_points(&fitted.posterior, &config.plan, space, y_best, iteration, &mut rng)?;
        let evals = evaluate_all(state.objective, &proposed, config.plan.repeats, seed, iteration)?;
        state.absorb(&evals)?;
        let warm = fitted.model.hyper().clone();
        fitted = state.refit(iteration, Some(&warm))?;
        history.records.push(state.record(iteration, proposed, evals, fitted.theta.clone()));
        history.meta.final_hyper = Some(fitted.model.hyper().clone());
    };

    let budget = DirectBudget::for_dims(space.dims());
    let res = direct_maximize(|u| -fitted.posterior.predict(u).mean, space.dims(), &budget)?;
    history.meta.model_minimizer = Some((space.from_unit(&res.best_x)?, -res.best_value));
    Ok(reason)
}
