//! Experiment runner for `hrmsbo`: parses a TOML experiment, runs every
//! (acquisition, repeats, batch, repetition) cell, and writes histories,
//! summaries and a manifest.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod snapshot;

pub use config::{ExperimentConfig, RunSpec};
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, summarize, Manifest, RunOptions};
pub use snapshot::{export_snapshot, MeshSpec};
