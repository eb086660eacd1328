//! Executes a configured run matrix and persists its artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! runs/<acq>_rs<l>_ms<m>/run_<k>/{history.csv, history.jsonl, run.json}
//! summary/{outcomes.csv, summary.csv, summary.json}
//! ```

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hrmsbo_core::engine::{run_gpbo, RunHistory, RunMeta, RunStatus};
use hrmsbo_core::evaluation::{
    fit_ground_truth, run_outcome, summarize_runs, write_outcomes_csv, write_summary_csv, ConfigSummary,
    GroundTruthModel, RunOutcome,
};
use hrmsbo_core::objectives::NoisyObjective;
use hrmsbo_core::rng::{derive_seed, label, stream};

use crate::config::{ExperimentConfig, RunSpec};
use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, write_atomic, write_json_atomic};

pub const TOOL: &str = "hrmsbo";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// Worker threads; bounds concurrent objective evaluations.
    pub jobs: Option<usize>,
    pub max_evals: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub config: String,
    #[serde(flatten)]
    pub spec: RunSpec,
    pub dir: PathBuf,
    pub evaluations: usize,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub master_seed: u64,
    pub max_evals_override: Option<usize>,
    pub runs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.status.is_failed()).count()
    }
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub summaries: Vec<ConfigSummary>,
}

/// Reads and validates a config file, returning it with its raw bytes.
pub fn load_config(path: &Path) -> CliResult<(ExperimentConfig, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((cfg, bytes))
}

/// Output directory: the override, else the config's `output_dir`
/// (relative to the config file), else `out/` next to the config.
pub fn resolve_out(config_path: &Path, cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    match &cfg.output_dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => base.join(d),
        None => base.join("out"),
    }
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Io(std::io::Error::other(e)))
}

pub fn save_history(dir: &Path, h: &RunHistory) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("history.csv"), |w| Ok(h.write_csv(w)?))?;
    write_atomic(&dir.join("history.jsonl"), |w| Ok(h.write_jsonl(w)?))?;
    write_json_atomic(&dir.join("run.json"), &h.meta)
}

pub fn load_history(dir: &Path) -> CliResult<RunHistory> {
    let meta_path = dir.join("run.json");
    let hist_path = dir.join("history.jsonl");
    for p in [&meta_path, &hist_path] {
        if !p.is_file() {
            return Err(CliError::NotFound(p.display().to_string()));
        }
    }
    let meta: RunMeta = serde_json::from_reader(BufReader::new(fs::File::open(meta_path)?))?;
    Ok(RunHistory::read_jsonl(meta, BufReader::new(fs::File::open(hist_path)?))?)
}

fn execute(cfg: &ExperimentConfig, objective: &dyn NoisyObjective, run: &RunSpec, out: &Path) -> CliResult<ManifestEntry> {
    let engine = cfg.engine_config_for(run);
    let dir = run.dir();
    let (status, evaluations) = match run_gpbo(objective, &engine, run.seed) {
        Ok(h) => {
            save_history(&out.join(&dir), &h)?;
            (h.meta.status.clone(), h.evaluations())
        }
        Err(e) => (RunStatus::Failed { message: e.to_string() }, 0),
    };
    Ok(ManifestEntry {
        config: run.config_key(),
        spec: run.clone(),
        dir,
        evaluations,
        status,
    })
}

/// Reference fit for SSE scoring, seeded from the master seed only so every
/// configuration is scored against the same surface.
pub fn ground_truth(cfg: &ExperimentConfig, objective: &dyn NoisyObjective) -> CliResult<Option<GroundTruthModel>> {
    let Some(t) = &cfg.truth else { return Ok(None) };
    let seed = derive_seed(cfg.seed, &[label("truth")]);
    let mut rng = stream(cfg.seed, &[label("truth_design")]);
    Ok(Some(fit_ground_truth(objective, &cfg.hyperpriors.priors(), &t.settings(), seed, &mut rng)?))
}

/// Scores every completed run in the manifest and writes the summary
/// tables.
pub fn summarize_into(
    cfg: &ExperimentConfig,
    objective: &dyn NoisyObjective,
    manifest: &Manifest,
    out: &Path,
) -> CliResult<Vec<ConfigSummary>> {
    let done: Vec<&ManifestEntry> = manifest.runs.iter().filter(|r| !r.status.is_failed()).collect();
    if done.is_empty() {
        return Ok(Vec::new());
    }
    let truth = ground_truth(cfg, objective)?;
    let outcomes: Vec<RunOutcome> = done
        .par_iter()
        .map(|r| {
            let h = load_history(&out.join(&r.dir))?;
            Ok(run_outcome(&h, Some(objective), truth.as_ref(), &r.config, r.spec.repetition)?)
        })
        .collect::<CliResult<_>>()?;
    let summaries = summarize_runs(&outcomes)?;
    let dir = out.join("summary");
    write_atomic(&dir.join("outcomes.csv"), |w| Ok(write_outcomes_csv(&outcomes, w)?))?;
    write_atomic(&dir.join("summary.csv"), |w| Ok(write_summary_csv(&summaries, w)?))?;
    write_json_atomic(&dir.join("summary.json"), &summaries)?;
    Ok(summaries)
}

/// Runs every cell of the matrix. Individual run failures are recorded in
/// the manifest and do not stop sibling runs.
pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> CliResult<ExperimentReport> {
    let (mut cfg, bytes) = load_config(config_path)?;
    if let Some(n) = opts.max_evals {
        if n == 0 {
            return Err(CliError::Config("--max-evals must be positive".into()));
        }
        cfg.termination.max_evaluations = Some(n);
    }
    let out = resolve_out(config_path, &cfg, opts.out.as_deref());
    fs::create_dir_all(&out)?;
    let objective = cfg.objective()?;
    let pool = thread_pool(opts.jobs)?;
    let runs = cfg.runs();
    let entries: Vec<ManifestEntry> =
        pool.install(|| runs.par_iter().map(|r| execute(&cfg, objective.as_ref(), r, &out)).collect::<CliResult<_>>())?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        config_hash: sha256_hex(&bytes),
        master_seed: cfg.seed,
        max_evals_override: opts.max_evals,
        runs: entries,
    };
    write_json_atomic(&out.join("manifest.json"), &manifest)?;
    let summaries = pool.install(|| summarize_into(&cfg, objective.as_ref(), &manifest, &out))?;
    Ok(ExperimentReport {
        out_dir: out,
        manifest,
        summaries,
    })
}

/// Recomputes the summary tables of an existing output directory.
pub fn summarize(config_path: &Path, out: Option<&Path>, jobs: Option<usize>) -> CliResult<Vec<ConfigSummary>> {
    let (cfg, _) = load_config(config_path)?;
    let out = resolve_out(config_path, &cfg, out);
    let mpath = out.join("manifest.json");
    if !mpath.is_file() {
        return Err(CliError::NotFound(mpath.display().to_string()));
    }
    let manifest: Manifest = serde_json::from_reader(BufReader::new(fs::File::open(mpath)?))?;
    let objective = cfg.objective()?;
    thread_pool(jobs)?.install(|| summarize_into(&cfg, objective.as_ref(), &manifest, &out))
}
