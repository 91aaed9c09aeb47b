//! Forward and inverse sigma-point filtering.
//!
//! This crate estimates two nested quantities. A *forward* filter (unscented
//! or extended Kalman) tracks a hidden state from noisy observations — the
//! adversary's view of the defender. An *inverse* filter then tracks the
//! forward filter's estimate itself, from the true state and from noisy
//! actions that depend on that estimate — the defender inferring what the
//! adversary has inferred.
//!
//! The main pieces:
//!
//! - [`model`]: nonlinear state-space models with additive Gaussian noise
//!   (transition `f`, observation `h`, action `g`, covariances `Q`, `R`,
//!   `Sigma_eps`), with optional analytic Jacobians.
//! - [`unscented`]: sigma-point generation and unscented moment propagation,
//!   with a jitter-laddered Cholesky for marginal covariances.
//! - [`forward`]: forward UKF and EKF steps and run drivers.
//! - [`inverse`]: the inverse UKF (augmented-state unscented filter over the
//!   replayed forward step) and inverse EKF, plus run drivers.
//! - [`rcrlb`]: Fisher-information recursions whose inverse trace
//!   lower-bounds estimator mean squared error.
//! - [`sim`]: seeded trajectory and observation simulation with reproducible
//!   per-run noise streams.
//! - [`scenarios`]: the frequency-demodulation and vehicle-reentry
//!   benchmarks and a linear toy system.
//! - [`oracle`]: closed-form linear Kalman and inverse-Kalman references used
//!   by the equivalence tests.

pub mod error;
pub mod forward;
pub mod inverse;
pub mod jacobian;
pub mod mat;
pub mod model;
pub mod oracle;
pub mod rcrlb;
pub mod scenarios;
pub mod sim;
pub mod unscented;

pub use error::{Error, Result};
pub use forward::{
    ekf_step, run_forward_filter, ukf_step, FilterState, ForwardFilterKind, ForwardStepTrace,
};
pub use inverse::{
    evaluate_ftilde, iekf_step, iukf_step, iukf_step_with_anchor, run_inverse_filter,
    update_sigma_star, AugmentedState, InverseFilterKind, InverseFilterState, InverseInit,
    InverseOptions, InverseRun, InverseStepTrace, SigmaStarAnchor,
};
pub use model::{Dims, StateSpaceModel};
pub use rcrlb::{
    forward_rcrlb_step, initial_information, inverse_rcrlb_step, rcrlb_position_metric,
    rcrlb_variance, regularize_covariance, InformationState,
};
pub use sim::{simulate_defender_observation, simulate_trajectory, RunStreams, Trajectory};
pub use unscented::{generate_sigma_points, robust_cholesky, unscented_moments, SigmaPointSet};
