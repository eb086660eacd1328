use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionFamily, AcquisitionSpec};
use crate::error::{Error, Result};

/// Number of trailing incumbent changes inspected by the stagnation test.
pub const STAGNATION_WINDOW: usize = 5;

/// Per-iteration sampling: `batch` distinct locations, each evaluated
/// `repeats` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub repeats: usize,
    pub acquisition: AcquisitionSpec,
}

impl SamplingPlan {
    pub fn new(family: AcquisitionFamily, repeats: usize, batch: usize) -> Self {
        SamplingPlan {
            repeats,
            acquisition: AcquisitionSpec::new(family, batch),
        }
    }

    pub fn batch(&self) -> usize {
        self.acquisition.batch_size
    }

    pub fn evals_per_iteration(&self) -> usize {
        self.repeats * self.batch()
    }

    /// `SS`, `RS`, `MS` or `HRMS`.
    pub fn kind(&self) -> &'static str {
        match (self.repeats > 1, self.batch() > 1) {
            (false, false) => "SS",
            (true, false) => "RS",
            (false, true) => "MS",
            (true, true) => "HRMS",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::arg("repeat count must be at least 1"));
        }
        self.acquisition.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminationCriteria {
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub max_evaluations: Option<usize>,
    #[serde(default)]
    pub max_wall_seconds: Option<f64>,
    /// Stagnation tolerance on the incumbent location (native units,
    /// max-norm). Unset means the location test always passes.
    #[serde(default)]
    pub x_tolerance: Option<f64>,
    #[serde(default)]
    pub y_tolerance: Option<f64>,
}

impl TerminationCriteria {
    pub fn evaluations(n: usize) -> Self {
        TerminationCriteria {
            max_evaluations: Some(n),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations.is_none() && self.max_evaluations.is_none() && self.max_wall_seconds.is_none() {
            return Err(Error::arg(
                "termination needs max_iterations, max_evaluations or max_wall_seconds",
            ));
        }
        if let Some(s) = self.max_wall_seconds {
            if !(s > 0.0) {
                return Err(Error::arg("max_wall_seconds must be positive"));
            }
        }
        for t in [self.x_tolerance, self.y_tolerance].into_iter().flatten() {
            if !(t > 0.0) {
                return Err(Error::arg("stagnation tolerances must be positive"));
            }
        }
        Ok(())
    }

    fn stagnation_enabled(&self) -> bool {
        self.x_tolerance.is_some() || self.y_tolerance.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEvaluations,
    MaxIterations,
    MaxWallSeconds,
    Stagnation,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxEvaluations => "max_evaluations",
            StopReason::MaxIterations => "max_iterations",
            StopReason::MaxWallSeconds => "max_wall_seconds",
            StopReason::Stagnation => "stagnation",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Progress snapshot consulted by [`check_termination`].
#[derive(Debug, Clone, Copy)]
pub struct Progress<'a> {
    pub evaluations: usize,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    /// Incumbents after the seed phase and after each iteration, oldest
    /// first.
    pub incumbents: &'a [(Vec<f64>, f64)],
}

/// First satisfied criterion, checked in the order evaluations,
/// iterations, wall clock, stagnation.
pub fn check_termination(progress: &Progress<'_>, criteria: &TerminationCriteria) -> Option<StopReason> {
    if criteria.max_evaluations.is_some_and(|m| progress.evaluations >= m) {
        return Some(StopReason::MaxEvaluations);
    }
    if criteria.max_iterations.is_some_and(|m| progress.iterations >= m) {
        return Some(StopReason::MaxIterations);
    }
    if criteria.max_wall_seconds.is_some_and(|m| progress.elapsed_seconds >= m) {
        return Some(StopReason::MaxWallSeconds);
    }
    if criteria.stagnation_enabled() && stagnant(progress.incumbents, criteria) {
        return Some(StopReason::Stagnation);
    }
    None
}

fn stagnant(inc: &[(Vec<f64>, f64)], c: &TerminationCriteria) -> bool {
    if inc.len() < STAGNATION_WINDOW + 1 {
        return false;
    }
    inc[inc.len() - STAGNATION_WINDOW - 1..].windows(2).all(|w| {
        let dy = (w[1].1 - w[0].1).abs();
        let dx = w[1].0.iter().zip(&w[0].0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        c.y_tolerance.is_none_or(|t| dy < t) && c.x_tolerance.is_none_or(|t| dx < t)
    })
}
