//! The optimization loop: sampling plans, termination, run histories.

mod history;
mod plan;
mod run;

pub use history::{Evaluation, IterationRecord, RunHistory, RunMeta, RunStatus};
pub use plan::{check_termination, Progress, SamplingPlan, StopReason, TerminationCriteria, STAGNATION_WINDOW};
pub use run::{
    evaluation_stream, fit_surrogate, propose_points, run_gpbo, EngineConfig, Fitted, Posterior, DEFAULT_RESTARTS,
};
