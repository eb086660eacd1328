//! Bayesian optimization of expensive, noisy black-box objectives with a
//! Matérn-3/2 Gaussian-process surrogate and hybrid repeat/multi-point
//! sampling.
//!
//! Each iteration proposes `m` distinct locations and evaluates each one
//! `l` times; every evaluation enters the GP as its own row.

pub mod acquisition;
pub mod direct;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod gp;
pub mod hyper;
pub mod objectives;
pub mod rng;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
pub use gp::{Dataset, GpModel, MaternHyperparams};
pub use space::{DesignMatrix, SearchSpace};
pub use surrogate::Surrogate;
