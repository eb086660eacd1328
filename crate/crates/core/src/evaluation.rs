//! Surrogate fidelity against a dense ground-truth fit, and cross-run
//! summary statistics.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::engine::RunHistory;
use crate::gp::{Dataset, GpModel};
use crate::hyper::{map_estimate, HyperPriors};
use crate::objectives::NoisyObjective;
use crate::rng::{derive_seed, label};
use crate::space::{latin_hypercube, unit_latin_hypercube};
use crate::surrogate::Surrogate;

/// Largest training set the dense ground-truth solve accepts.
pub const MAX_TRUTH_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSettings {
    pub samples: usize,
    pub mesh_size: usize,
    /// Hyperparameters are estimated on the first `hyper_subsample`
    /// samples, then the model is refit on all of them. `None` uses all.
    pub hyper_subsample: Option<usize>,
    pub restarts: usize,
}

impl Default for TruthSettings {
    fn default() -> Self {
        TruthSettings {
            samples: 2000,
            mesh_size: 2000,
            hyper_subsample: Some(500),
            restarts: 5,
        }
    }
}

/// A dense reference fit with cached latent mean and sd on a fixed mesh.
#[derive(Debug, Clone)]
pub struct GroundTruthModel {
    pub model: GpModel,
    /// Mesh in unit coordinates.
    pub mesh: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Latent mean and sd of `model` at every mesh row.
pub fn mesh_surface<S: Surrogate>(model: &S, mesh: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let preds: Vec<_> = mesh.par_iter().map(|x| model.predict(x)).collect();
    (preds.iter().map(|p| p.mean).collect(), preds.iter().map(|p| p.sd()).collect())
}

/// Fits the reference model: a Latin-hypercube sample evaluated once per
/// point, MAP hyperparameters, and surfaces cached on a separate
/// Latin-hypercube mesh. Noise streams derive from `seed`.
pub fn fit_ground_truth<R: Rng + ?Sized>(
    objective: &dyn NoisyObjective,
    priors: &HyperPriors,
    settings: &TruthSettings,
    seed: u64,
    rng: &mut R,
) -> Result<GroundTruthModel> {
    let space = objective.space();
    let d = space.dims();
    if settings.samples == 0 {
        return Err(Error::arg("ground truth needs at least one sample"));
    }
    if settings.samples > MAX_TRUTH_SAMPLES {
        return Err(Error::Resource(format!(
            "{} ground-truth samples exceed the dense limit {MAX_TRUTH_SAMPLES}",
            settings.samples
        )));
    }
    if settings.mesh_size < 100 * d {
        return Err(Error::arg(format!("mesh of {} points is below 100 per dimension", settings.mesh_size)));
    }
    let design = latin_hypercube(space, settings.samples, rng)?.into_points();
    let ys: Vec<f64> = design
        .par_iter()
        .enumerate()
        .map(|(i, x)| objective.evaluate(x, derive_seed(seed, &[label("truth"), i as u64])))
        .collect::<Result<_>>()?;
    let mut data = Dataset::new(d);
    for (x, y) in design.iter().zip(&ys) {
        data.push(space.to_unit(x)?, *y)?;
    }
    let k = settings.hyper_subsample.unwrap_or(data.len()).clamp(1, data.len());
    let sub = Dataset::from_rows(d, data.x()[..k].to_vec(), data.f()[..k].to_vec())?;
    let est = map_estimate(&sub, priors, settings.restarts, None, rng)?;
    let model = GpModel::fit(&data, &est.hyper)?;
    let mesh = unit_latin_hypercube(d, settings.mesh_size, rng)?.into_points();
    let (mean, sd) = mesh_surface(&model, &mesh);
    Ok(GroundTruthModel { model, mesh, mean, sd })
}

fn sse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims<S: Surrogate>(candidate: &S, truth: &GroundTruthModel) -> Result<()> {
    if candidate.dims() != truth.model.dims() {
        return Err(Error::arg(format!(
            "candidate has {} dimensions, truth mesh has {}",
            candidate.dims(),
            truth.model.dims()
        )));
    }
    Ok(())
}

/// Sum of squared differences of the mean surfaces over the truth mesh.
pub fn sse_mean<S: Surrogate>(candidate: &S, truth: &GroundTruthModel) -> Result<f64> {
    check_dims(candidate, truth)?;
    Ok(sse(&mesh_surface(candidate, &truth.mesh).0, &truth.mean))
}

/// Sum of squared differences of the latent sd surfaces.
pub fn sse_sigma<S: Surrogate>(candidate: &S, truth: &GroundTruthModel) -> Result<f64> {
    check_dims(candidate, truth)?;
    Ok(sse(&mesh_surface(candidate, &truth.mesh).1, &truth.sd))
}

/// Final numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Configuration key, e.g. `ucb_rs3_ms3`.
    pub config: String,
    pub run: usize,
    pub x_hat: Vec<f64>,
    /// Best observed (noisy) value.
    pub y_hat: f64,
    /// Noise-free objective at `x_hat`, when the objective exposes one.
    pub y_true: Option<f64>,
    pub sse_mean: Option<f64>,
    pub sse_sigma: Option<f64>,
    pub evaluations: usize,
    pub wall_seconds: f64,
}

/// Refits the final MAP model of a run from its stored evaluations.
pub fn final_model(history: &RunHistory) -> Result<GpModel> {
    let hyper = history
        .meta
        .final_hyper
        .as_ref()
        .ok_or_else(|| Error::arg("run history has no fitted hyperparameters"))?;
    GpModel::fit(&history.dataset()?, hyper)
}

/// Collects a run's final numbers, scoring its surrogate against `truth`
/// when one is given.
pub fn run_outcome(
    history: &RunHistory,
    objective: Option<&dyn NoisyObjective>,
    truth: Option<&GroundTruthModel>,
    config: &str,
    run: usize,
) -> Result<RunOutcome> {
    let (x, y) = history
        .incumbent()
        .ok_or_else(|| Error::arg("run history has no evaluations"))?;
    let (sse_mean, sse_sigma) = match truth {
        Some(t) => {
            let m = final_model(history)?;
            (Some(sse_mean(&m, t)?), Some(sse_sigma(&m, t)?))
        }
        None => (None, None),
    };
    Ok(RunOutcome {
        config: config.to_string(),
        run,
        x_hat: x.to_vec(),
        y_hat: y,
        y_true: objective.and_then(|o| o.mean_value(x)),
        sse_mean,
        sse_sigma,
        evaluations: history.evaluations(),
        wall_seconds: history.records.last().map_or(0.0, |r| r.wall_ms / 1e3),
    })
}

/// Median, interquartile range and sample variance of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub median: f64,
    /// `None` with fewer than two values.
    pub iqr: Option<f64>,
    /// Unbiased sample variance; `None` with fewer than two values.
    pub variance: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Stat {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("statistics need at least one value"));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let (iqr, variance) = if n >= 2 {
            let mean = s.iter().sum::<f64>() / n as f64;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (Some(quantile(&s, 0.75) - quantile(&s, 0.25)), Some(var))
        } else {
            (None, None)
        };
        Ok(Stat {
            n,
            median: quantile(&s, 0.5),
            iqr,
            variance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: String,
    pub runs: usize,
    pub y_hat: Stat,
    pub y_true: Option<Stat>,
    pub sse_mean: Option<Stat>,
    pub sse_sigma: Option<Stat>,
    pub evaluations: Stat,
    pub wall_seconds: Stat,
}

fn optional_stat(values: &[Option<f64>]) -> Result<Option<Stat>> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        Ok(None)
    } else {
        Stat::of(&v).map(Some)
    }
}

/// Per-configuration statistics, ordered by configuration key.
pub fn summarize_runs(outcomes: &[RunOutcome]) -> Result<Vec<ConfigSummary>> {
    if outcomes.is_empty() {
        return Err(Error::arg("no runs to summarize"));
    }
    let mut groups: BTreeMap<&str, Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry(&o.config).or_default().push(o);
    }
    groups
        .into_iter()
        .map(|(config, runs)| {
            let col = |f: fn(&RunOutcome) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let opt = |f: fn(&RunOutcome) -> Option<f64>| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
            Ok(ConfigSummary {
                config: config.to_string(),
                runs: runs.len(),
                y_hat: Stat::of(&col(|r| r.y_hat))?,
                y_true: optional_stat(&opt(|r| r.y_true))?,
                sse_mean: optional_stat(&opt(|r| r.sse_mean))?,
                sse_sigma: optional_stat(&opt(|r| r.sse_sigma))?,
                evaluations: Stat::of(&col(|r| r.evaluations as f64))?,
                wall_seconds: Stat::of(&col(|r| r.wall_seconds))?,
            })
        })
        .collect()
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Box-plot source rows: one line per run.
pub fn write_outcomes_csv<W: Write>(outcomes: &[RunOutcome], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["config", "run", "y_hat", "y_true", "sse_mean", "sse_sigma", "evaluations", "wall_seconds", "x_hat"])?;
    for o in outcomes {
        let x = o.x_hat.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        out.write_record([
            o.config.clone(),
            o.run.to_string(),
            o.y_hat.to_string(),
            opt_str(o.y_true),
            opt_str(o.sse_mean),
            opt_str(o.sse_sigma),
            o.evaluations.to_string(),
            o.wall_seconds.to_string(),
            x,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One line per configuration and metric.
pub fn write_summary_csv<W: Write>(summaries: &[ConfigSummary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["config", "metric", "n", "median", "iqr", "variance"])?;
    for s in summaries {
        let metrics = [
            ("y_hat", Some(s.y_hat)),
            ("y_true", s.y_true),
            ("sse_mean", s.sse_mean),
            ("sse_sigma", s.sse_sigma),
            ("evaluations", Some(s.evaluations)),
            ("wall_seconds", Some(s.wall_seconds)),
        ];
        for (name, stat) in metrics {
            let Some(st) = stat else { continue };
            out.write_record([
                s.config.clone(),
                name.to_string(),
                st.n.to_string(),
                st.median.to_string(),
                opt_str(st.iqr),
                opt_str(st.variance),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
