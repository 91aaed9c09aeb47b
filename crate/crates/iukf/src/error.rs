//! Error type shared by the model, simulation, and filter code.

use nalgebra::DMatrix;
use thiserror::Error;

/// Everything that can go wrong while building models, simulating, filtering,
/// or propagating information matrices.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong shape for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A matrix that must be symmetric was not, beyond tolerance.
    #[error("{context}: matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric {
        context: &'static str,
        asymmetry: f64,
    },

    /// A covariance was indefinite beyond what clamping/jitter may repair.
    #[error(
        "{context}: matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})"
    )]
    NotPositiveSemidefinite {
        context: &'static str,
        min_eigenvalue: f64,
    },

    /// Cholesky factorization failed even after the full jitter ladder.
    /// Carries the offending matrix so the failure can be reproduced.
    #[error("{context}: factorization failed after jitter up to {max_jitter:.3e}; offending matrix: {matrix}")]
    Factorization {
        context: &'static str,
        max_jitter: f64,
        matrix: DMatrix<f64>,
    },

    /// An innovation covariance could not be solved against.
    #[error("{context}: innovation covariance is singular")]
    SingularInnovation { context: &'static str },

    /// An information-matrix update hit a singular intermediate.
    #[error("{context}: singular matrix (condition estimate {condition:.3e})")]
    SingularInformation {
        context: &'static str,
        condition: f64,
    },

    /// A state, covariance, or simulated quantity picked up NaN/inf entries.
    #[error("non-finite values in {context} at step {step}")]
    NonFinite { context: &'static str, step: usize },

    /// The requested filter combination or parameterization is unusable.
    #[error("invalid configuration: {reason}")]
    InvalidConfiguration { reason: String },

    /// The sigma-point spread parameter would make n + kappa non-positive.
    #[error("kappa {kappa} is invalid for dimension {n}: n + kappa must be positive")]
    InvalidKappa { kappa: f64, n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
