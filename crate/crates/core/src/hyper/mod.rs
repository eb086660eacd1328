//! Hyperparameter learning: MAP estimation under independent hyperpriors,
//! the Laplace approximation around the mode, and sigma-point
//! marginalized prediction.

mod laplace;
mod map;
mod marginal;
mod optimize;
mod prior;

pub use laplace::{
    covariance_from_gradient, laplace_covariance, pinned_parameters, LaplacePosterior, HESSIAN_STEP,
    PINNED_FLOOR,
};
pub use map::{log_posterior_with_grad, map_estimate, mle_estimate, MapEstimate, INWARD_MARGIN};
pub use marginal::{
    marginalized_model, marginalized_posterior, sigma_points, MixtureModel, MixturePrediction, SIGMA_KAPPA,
};
pub use prior::{HyperPriors, ParamPrior};
