//! Gaussian-process surrogate: Matérn-3/2 kernel, dense Cholesky fit,
//! posterior queries, marginal likelihood and joint function draws.

mod kernel;
mod model;

pub use kernel::{kernel, LengthScale, MaternHyperparams};
pub use model::{
    log_marginal_likelihood, log_marginal_likelihood_grad, log_marginal_likelihood_with_grad,
    Dataset, GpModel, Prediction, VarianceKind, JITTER_LADDER, MAX_JOINT_GRID,
};
