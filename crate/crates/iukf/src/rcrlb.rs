//! Posterior Cramer-Rao lower bounds via Fisher-information recursions.
//!
//! For additive-Gaussian state-space models the information recursion
//! simplifies to
//!
//! ```text
//!   J_k = Q^-1 + H^T R^-1 H - Q^-1 F (J_{k-1} + F^T Q^-1 F)^-1 F^T Q^-1
//! ```
//!
//! with J_0 = Sigma_0^-1; the trace of J_k^-1 lower-bounds the mean squared
//! error of any estimator of the state at time k. The same formula, fed with
//! the inverse filter's transition Jacobian, action Jacobian, effective
//! process noise K R K^T (regularized to invertibility), and action-noise
//! covariance, bounds the defender's estimate of the adversary's estimate.
//!
//! All operations here are pure matrix functions; callers decide where the
//! Jacobians are linearized and supply them explicitly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mat::symmetrized;

/// Default scale for the process-noise regularization delta.
pub const DEFAULT_REGULARIZATION_SCALE: f64 = 1e-8;

/// Fisher information matrix at a time step.
#[derive(Debug, Clone)]
pub struct InformationState {
    /// Information matrix, symmetric positive definite.
    pub j: DMatrix<f64>,
    /// Time index k.
    pub k: usize,
}

fn positive_definite_inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let sym = symmetrized(m);
    nalgebra::Cholesky::new(sym)
        .map(|c| c.inverse())
        .ok_or(Error::SingularInformation {
            context,
            condition: crate::mat::condition_estimate(m),
        })
}

/// J_0 = Sigma_0^-1.
pub fn initial_information(sigma0: &DMatrix<f64>) -> Result<InformationState> {
    let j = positive_definite_inverse(sigma0, "initial covariance")?;
    Ok(InformationState { j, k: 0 })
}

fn information_step(
    prev: &InformationState,
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q_reg: &DMatrix<f64>,
    r: &DMatrix<f64>,
    context: &'static str,
) -> Result<InformationState> {
    let n = prev.j.nrows();
    if f.nrows() != n || f.ncols() != n || h.ncols() != n {
        return Err(Error::Dimension {
            context: "information recursion",
            expected: format!("{n}x{n} transition and *x{n} observation Jacobians"),
            got: format!(
                "{}x{} and {}x{}",
                f.nrows(),
                f.ncols(),
                h.nrows(),
                h.ncols()
            ),
        });
    }
    let q_inv = positive_definite_inverse(q_reg, context)?;
    let r_inv = positive_definite_inverse(r, "measurement noise in information recursion")?;

    let observed = h.transpose() * &r_inv * h;
    let s = &q_inv * f; // Q^-1 F
    let inner = symmetrized(&(&prev.j + f.transpose() * &s));
    let inner_chol = nalgebra::Cholesky::new(inner).ok_or(Error::SingularInformation {
        context: "predicted information in recursion",
        condition: f64::INFINITY,
    })?;
    let correction = &s * inner_chol.solve(&s.transpose());
    let j = symmetrized(&(&q_inv + observed - correction));
    Ok(InformationState { j, k: prev.k + 1 })
}

/// One forward-bound step with explicit linearizations.
pub fn forward_rcrlb_step(
    prev: &InformationState,
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q_reg: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<InformationState> {
    information_step(
        prev,
        f,
        h,
        q_reg,
        r,
        "process noise in information recursion",
    )
}

/// One inverse-bound step: same recursion, fed with the inverse transition
/// Jacobian, the action Jacobian, the regularized gain-shaped process noise
/// K R K^T, and the action-noise covariance.
pub fn inverse_rcrlb_step(
    prev: &InformationState,
    ftilde: &DMatrix<f64>,
    g: &DMatrix<f64>,
    qbar_reg: &DMatrix<f64>,
    sigma_eps: &DMatrix<f64>,
) -> Result<InformationState> {
    information_step(
        prev,
        ftilde,
        g,
        qbar_reg,
        sigma_eps,
        "inverse process noise in information recursion",
    )
}

/// Sum of selected diagonal entries of J^-1 (a variance bound, before the
/// square root).
pub fn rcrlb_variance(info: &InformationState, indices: &[usize]) -> Result<f64> {
    let n = info.j.nrows();
    for &i in indices {
        if i >= n {
            return Err(Error::Dimension {
                context: "rcrlb metric indices",
                expected: format!("indices < {n}"),
                got: format!("{i}"),
            });
        }
    }
    let inv = positive_definite_inverse(&info.j, "information matrix in metric")?;
    Ok(indices.iter().map(|&i| inv[(i, i)]).sum())
}

/// Root-sum bound over the selected state components:
/// sqrt(sum_i [J^-1]_{i,i}).
pub fn rcrlb_position_metric(info: &InformationState, indices: &[usize]) -> Result<f64> {
    Ok(rcrlb_variance(info, indices)?.sqrt())
}

/// Add `delta * I` with `delta = scale * max(1, trace/n)` so that singular or
/// nearly singular process-noise covariances become invertible. Returns the
/// regularized matrix and the delta actually applied.
pub fn regularize_covariance(m: &DMatrix<f64>, scale: f64) -> (DMatrix<f64>, f64) {
    let n = m.nrows().max(1);
    let delta = scale * (m.trace() / n as f64).max(1.0);
    let mut out = symmetrized(m);
    for i in 0..m.nrows() {
        out[(i, i)] += delta;
    }
    (out, delta)
}

/// Convenience: run the forward recursion over per-step Jacobian sequences.
/// `fs[k]` and `hs[k]` produce the step from J_k to J_{k+1}; returns the
/// information states J_1..J_N.
pub fn run_forward_rcrlb(
    init: &InformationState,
    fs: &[DMatrix<f64>],
    hs: &[DMatrix<f64>],
    q_reg: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<Vec<InformationState>> {
    if fs.len() != hs.len() {
        return Err(Error::Dimension {
            context: "run_forward_rcrlb",
            expected: format!("{} observation Jacobians", fs.len()),
            got: format!("{}", hs.len()),
        });
    }
    let mut out = Vec::with_capacity(fs.len());
    let mut current = init.clone();
    for (f, h) in fs.iter().zip(hs) {
        current = forward_rcrlb_step(&current, f, h, q_reg, r)?;
        out.push(current.clone());
    }
    Ok(out)
}
