use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrmsbo_cli::experiment::load_config;
use hrmsbo_cli::{export_snapshot, run_experiment, summarize, CliError, MeshSpec, RunOptions};

#[derive(Parser)]
#[command(name = "hrmsbo", version, about = "Bayesian optimization experiments with repeat/multi-point sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (acquisition, RS, MS, repetition) cell.
    Run {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Worker threads, bounding concurrent objective evaluations.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override `termination.max_evaluations`.
        #[arg(long)]
        max_evals: Option<usize>,
    },
    /// Recompute summary tables from an existing output directory.
    Summarize {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Export the final surrogate's mean and sd surfaces of one run.
    Snapshot {
        /// Run directory containing run.json and history.jsonl.
        #[arg(long)]
        run: PathBuf,
        /// Regular grid with this many points per axis.
        #[arg(long, default_value_t = 50, conflicts_with = "points")]
        grid: usize,
        /// CSV of native-coordinate points (header row first).
        #[arg(long)]
        points: Option<PathBuf>,
        /// Output CSV; defaults to <run>/snapshot.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add the run's acquisition surface as a column.
        #[arg(long)]
        acquisition: bool,
    },
    /// Parse and check a config without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { cfg, jobs, max_evals } => {
            let opts = RunOptions {
                out: cfg.out,
                jobs,
                max_evals,
            };
            let report = run_experiment(&cfg.config, &opts)?;
            let failed = report.manifest.failed();
            println!(
                "{} runs, {} failed; artifacts in {}",
                report.manifest.runs.len(),
                failed,
                report.out_dir.display()
            );
            Ok(if failed > 0 { 1 } else { 0 })
        }
        Command::Summarize { cfg, jobs } => {
            let s = summarize(&cfg.config, cfg.out.as_deref(), jobs)?;
            println!("summarized {} configurations", s.len());
            Ok(0)
        }
        Command::Snapshot {
            run,
            grid,
            points,
            out,
            acquisition,
        } => {
            let mesh = points.map_or(MeshSpec::Grid(grid), MeshSpec::Points);
            let path = export_snapshot(&run, &mesh, out.as_deref(), acquisition)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::ValidateConfig { config } => {
            let (cfg, _) = load_config(&config)?;
            println!("ok: {} runs", cfg.runs().len());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
