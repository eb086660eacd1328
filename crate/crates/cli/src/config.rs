//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hrmsbo_core::acquisition::{AcquisitionFamily, Beta};
use hrmsbo_core::direct::DirectBudget;
use hrmsbo_core::engine::{EngineConfig, SamplingPlan, TerminationCriteria, DEFAULT_RESTARTS};
use hrmsbo_core::evaluation::TruthSettings;
use hrmsbo_core::hyper::{HyperPriors, ParamPrior};
use hrmsbo_core::objectives::{self, Ackley, ExternalObjective, NoisyObjective};
use hrmsbo_core::rng::{derive_seed, label};
use hrmsbo_core::SearchSpace;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Defaults to ten points per dimension.
    #[serde(default)]
    pub seed_design_size: Option<usize>,
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    pub sampling: SamplingSection,
    pub termination: TerminationCriteria,
    #[serde(default)]
    pub hyperpriors: HyperSection,
    /// Scores each run against a dense reference fit when present.
    #[serde(default)]
    pub truth: Option<TruthSection>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    /// `ackley3`, `ackley` (needs `[bounds]`), `forrester`,
    /// `synthetic_ttk` or `external` (needs `[bounds]` and `command`).
    pub name: String,
    #[serde(default)]
    pub noise_var: Option<f64>,
    #[serde(default)]
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub acquisitions: Vec<AcquisitionFamily>,
    /// Repeat counts `l` (RS).
    pub repeats: Vec<usize>,
    /// Batch sizes `m` (MS).
    pub batches: Vec<usize>,
    #[serde(default)]
    pub ucb_beta: Beta,
    #[serde(default)]
    pub ts_grid_size: Option<usize>,
    /// DIRECT evaluations per acquisition maximization.
    #[serde(default)]
    pub direct_evals: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default = "default_log_prior")]
    pub noise_var: ParamPrior,
    #[serde(default = "default_log_prior")]
    pub amplitude: ParamPrior,
    #[serde(default = "default_length_prior")]
    pub length_scale: ParamPrior,
    #[serde(default = "default_mean_prior")]
    pub mean: ParamPrior,
    #[serde(default)]
    pub ard: bool,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "yes")]
    pub marginalize: bool,
}

fn default_log_prior() -> ParamPrior {
    ParamPrior::Uniform { lo: -2.0, hi: 4.0 }
}

fn default_length_prior() -> ParamPrior {
    ParamPrior::Uniform { lo: -3.0, hi: 1.0 }
}

fn default_mean_prior() -> ParamPrior {
    ParamPrior::Gaussian { mean: 0.0, var: 1e4 }
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

impl Default for HyperSection {
    fn default() -> Self {
        HyperSection {
            noise_var: default_log_prior(),
            amplitude: default_log_prior(),
            length_scale: default_length_prior(),
            mean: default_mean_prior(),
            ard: false,
            restarts: DEFAULT_RESTARTS,
            marginalize: true,
        }
    }
}

impl HyperSection {
    pub fn priors(&self) -> HyperPriors {
        HyperPriors {
            noise_var: self.noise_var,
            amplitude: self.amplitude,
            length_scale: self.length_scale,
            mean: self.mean,
            ard: self.ard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    #[serde(default = "truth_samples")]
    pub samples: usize,
    #[serde(default = "truth_samples")]
    pub mesh_size: usize,
    #[serde(default)]
    pub hyper_subsample: Option<usize>,
    #[serde(default = "truth_restarts")]
    pub restarts: usize,
}

fn truth_samples() -> usize {
    2000
}

fn truth_restarts() -> usize {
    5
}

impl TruthSection {
    pub fn settings(&self) -> TruthSettings {
        TruthSettings {
            samples: self.samples,
            mesh_size: self.mesh_size,
            hyper_subsample: self.hyper_subsample,
            restarts: self.restarts,
        }
    }
}

/// One cell of the run matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub acquisition: AcquisitionFamily,
    pub repeats: usize,
    pub batch: usize,
    pub repetition: usize,
    pub seed: u64,
}

impl RunSpec {
    /// Configuration key shared by all repetitions, e.g. `ucb_rs3_ms3`.
    pub fn config_key(&self) -> String {
        format!("{}_rs{}_ms{}", self.acquisition, self.repeats, self.batch)
    }

    /// Run directory relative to the output root.
    pub fn dir(&self) -> PathBuf {
        Path::new("runs")
            .join(self.config_key())
            .join(format!("run_{:03}", self.repetition))
    }
}

/// Run seed derived from the master seed and the matrix cell.
pub fn run_seed(master: u64, acquisition: AcquisitionFamily, repeats: usize, batch: usize, repetition: usize) -> u64 {
    derive_seed(
        master,
        &[label(acquisition.as_str()), repeats as u64, batch as u64, repetition as u64],
    )
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        let s = &self.sampling;
        if s.acquisitions.is_empty() || s.repeats.is_empty() || s.batches.is_empty() {
            return bad("sampling.acquisitions, sampling.repeats and sampling.batches must be non-empty".into());
        }
        if s.repeats.contains(&0) {
            return bad("sampling.repeats entries must be positive".into());
        }
        if s.batches.contains(&0) {
            return bad("sampling.batches entries must be positive".into());
        }
        if s.direct_evals == Some(0) {
            return bad("sampling.direct_evals must be positive".into());
        }
        if self.seed_design_size == Some(0) {
            return bad("seed_design_size must be positive".into());
        }
        match (self.objective.name.as_str(), &self.bounds, &self.objective.command) {
            ("ackley3" | "forrester" | "synthetic_ttk", Some(_), _) => {
                return bad(format!("objective `{}` has fixed bounds; remove [bounds]", self.objective.name))
            }
            ("ackley" | "external", None, _) => {
                return bad(format!("objective `{}` needs a [bounds] section", self.objective.name))
            }
            ("external", _, None) => return bad("objective `external` needs `command`".into()),
            (n, _, Some(_)) if n != "external" => return bad("`command` only applies to `external`".into()),
            ("ackley3" | "forrester" | "synthetic_ttk" | "ackley" | "external", _, _) => {}
            (other, _, _) => return bad(format!("unknown objective `{other}`")),
        }
        if let Some(b) = &self.bounds {
            SearchSpace::new(b.lower.clone(), b.upper.clone()).map_err(|e| CliError::Config(format!("bounds: {e}")))?;
        }
        // Engine-level checks on one representative cell.
        let probe = RunSpec {
            acquisition: s.acquisitions[0],
            repeats: s.repeats[0],
            batch: s.batches[0],
            repetition: 0,
            seed: 0,
        };
        self.engine_config(&probe, 1).validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(t) = &self.truth {
            if t.samples == 0 || t.mesh_size == 0 || t.restarts == 0 {
                return bad("truth.samples, truth.mesh_size and truth.restarts must be positive".into());
            }
        }
        Ok(())
    }

    pub fn space(&self) -> CliResult<SearchSpace> {
        match &self.bounds {
            Some(b) => {
                let names = b
                    .names
                    .clone()
                    .unwrap_or_else(|| (1..=b.lower.len()).map(|i| format!("x{i}")).collect());
                Ok(SearchSpace::with_names(b.lower.clone(), b.upper.clone(), names)?)
            }
            None => Ok(self.objective()?.space().clone()),
        }
    }

    /// Instantiates the objective. External objectives spawn their process.
    pub fn objective(&self) -> CliResult<Box<dyn NoisyObjective>> {
        let o = &self.objective;
        match o.name.as_str() {
            "ackley" => {
                let space = self.space()?;
                Ok(Box::new(Ackley::new(space, o.noise_var.unwrap_or(objectives::ACKLEY3_NOISE_VAR))?))
            }
            "external" => {
                let space = self.space()?;
                let cmd = o.command.as_deref().unwrap_or_default();
                Ok(Box::new(ExternalObjective::spawn("external", space, cmd)?))
            }
            name => Ok(objectives::builtin(name, o.noise_var)?),
        }
    }

    fn dims(&self) -> usize {
        match (&self.bounds, self.objective.name.as_str()) {
            (Some(b), _) => b.lower.len(),
            (None, "forrester") => 1,
            (None, "synthetic_ttk") => 2,
            _ => 3,
        }
    }

    /// Every (acquisition, l, m, repetition) cell in a stable order.
    pub fn runs(&self) -> Vec<RunSpec> {
        let s = &self.sampling;
        let mut out = Vec::new();
        for &acquisition in &s.acquisitions {
            for &repeats in &s.repeats {
                for &batch in &s.batches {
                    for repetition in 0..self.repetitions {
                        out.push(RunSpec {
                            acquisition,
                            repeats,
                            batch,
                            repetition,
                            seed: run_seed(self.seed, acquisition, repeats, batch, repetition),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn engine_config(&self, run: &RunSpec, dims: usize) -> EngineConfig {
        let mut plan = SamplingPlan::new(run.acquisition, run.repeats, run.batch);
        plan.acquisition.beta = self.sampling.ucb_beta;
        plan.acquisition.ts_grid_size = self.sampling.ts_grid_size;
        plan.acquisition.direct = self.sampling.direct_evals.map(DirectBudget::evals);
        EngineConfig {
            plan,
            seed_design_size: self.seed_design_size.unwrap_or(10 * dims),
            priors: self.hyperpriors.priors(),
            termination: self.termination.clone(),
            restarts: self.hyperpriors.restarts,
            marginalize: self.hyperpriors.marginalize,
        }
    }

    pub fn engine_config_for(&self, run: &RunSpec) -> EngineConfig {
        self.engine_config(run, self.dims())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ACKLEY: &str = r#"
seed = 7
repetitions = 10
seed_design_size = 20

[objective]
name = "ackley3"
noise_var = 25.0

[sampling]
acquisitions = ["ei", "ucb", "ts"]
repeats = [1, 3, 5, 10]
batches = [1, 3, 5]

[termination]
max_evaluations = 200
"#;

    #[test]
    fn paper_matrix_has_360_runs() {
        let cfg = ExperimentConfig::parse(ACKLEY).unwrap();
        let runs = cfg.runs();
        assert_eq!(runs.len(), 360);
        let dirs: std::collections::BTreeSet<_> = runs.iter().map(|r| r.dir()).collect();
        assert_eq!(dirs.len(), 360);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let cfg = ExperimentConfig::parse(ACKLEY).unwrap();
        let a = cfg.runs();
        let b = cfg.runs();
        assert_eq!(a, b);
        let seeds: std::collections::BTreeSet<_> = a.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), a.len());
    }

    #[test]
    fn unknown_field_is_rejected_with_location() {
        let err = ExperimentConfig::parse(&ACKLEY.replace("repetitions", "repetitons")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("repetitons"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn zero_repeat_rejected() {
        assert!(ExperimentConfig::parse(&ACKLEY.replace("[1, 3, 5, 10]", "[0, 3]")).is_err());
    }

    #[test]
    fn missing_budget_rejected() {
        assert!(ExperimentConfig::parse(&ACKLEY.replace("max_evaluations = 200", "")).is_err());
    }
}
