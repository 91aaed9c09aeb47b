//! Forward filters: the adversary's state estimators.
//!
//! Two steppers share one interface: an unscented filter (sigma-point
//! propagation with spread parameter kappa, regenerating the points between
//! time and measurement update) and a first-order extended filter
//! (linearization via Jacobians). Both produce, besides the new state, a
//! trace of the intermediate quantities (prediction, innovation covariance,
//! gain) that the inverse machinery and the bound recursions feed on.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mat::{symmetrized, vector_is_finite};
use crate::model::StateSpaceModel;
use crate::sim::Trajectory;
use crate::unscented::{cross_covariance, generate_sigma_points, unscented_moments};

/// Which forward filter to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardFilterKind {
    Ukf,
    Ekf,
}

impl ForwardFilterKind {
    pub fn label(&self) -> &'static str {
        match self {
            ForwardFilterKind::Ukf => "ukf",
            ForwardFilterKind::Ekf => "ekf",
        }
    }
}

/// Posterior state of a forward filter after step k.
#[derive(Debug, Clone)]
pub struct FilterState {
    /// Posterior mean xhat_k.
    pub xhat: DVector<f64>,
    /// Posterior covariance Sigma_k.
    pub sigma: DMatrix<f64>,
    /// Step index k.
    pub k: usize,
}

/// Intermediate quantities of one forward step.
#[derive(Debug, Clone)]
pub struct ForwardStepTrace {
    /// Predicted mean xhat_{k+1|k}.
    pub xhat_pred: DVector<f64>,
    /// Predicted covariance Sigma_{k+1|k}.
    pub sigma_pred: DMatrix<f64>,
    /// Predicted measurement yhat_{k+1|k}.
    pub yhat_pred: DVector<f64>,
    /// Innovation covariance (includes R).
    pub sigma_y: DMatrix<f64>,
    /// State-measurement cross covariance.
    pub sigma_xy: DMatrix<f64>,
    /// Kalman gain K_{k+1}.
    pub gain: DMatrix<f64>,
}

/// Solve K Sigma_y = Sigma_xy for the gain without forming an explicit
/// inverse. Sigma_y is symmetric, so K^T solves Sigma_y K^T = Sigma_xy^T.
pub(crate) fn kalman_gain(
    sigma_xy: &DMatrix<f64>,
    sigma_y: &DMatrix<f64>,
    context: &'static str,
) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(symmetrized(sigma_y)).ok_or(Error::SingularInnovation { context })?;
    Ok(chol.solve(&sigma_xy.transpose()).transpose())
}

/// Everything an unscented prediction/update computes except the application
/// of an actual measurement: shared between the forward step, the inverse
/// filter's replay of the forward step, and the defender's covariance
/// replica.
#[derive(Debug, Clone)]
pub(crate) struct UkfPropagation {
    pub xhat_pred: DVector<f64>,
    pub sigma_pred: DMatrix<f64>,
    pub yhat_pred: DVector<f64>,
    pub sigma_y: DMatrix<f64>,
    pub sigma_xy: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Posterior covariance Sigma_pred - K Sigma_y K^T (measurement
    /// independent, hence computable here).
    pub sigma_post: DMatrix<f64>,
}

/// Run the unscented prediction and measurement-moment computation from
/// `(xhat, sigma)`. Sigma points are regenerated from the predicted moments
/// before the measurement pass.
pub(crate) fn ukf_propagate(
    model: &StateSpaceModel,
    xhat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    kappa: f64,
) -> Result<UkfPropagation> {
    // Time update: push sigma points through f, add Q.
    let set = generate_sigma_points(xhat, sigma, kappa)?;
    let propagated: Vec<DVector<f64>> = set.points.iter().map(|p| model.f(p)).collect();
    let (xhat_pred, sigma_pred) = unscented_moments(&set, &propagated, Some(model.q()))?;

    // Measurement update: fresh sigma points from the predicted moments.
    let meas_set = generate_sigma_points(&xhat_pred, &sigma_pred, kappa)?;
    let measured: Vec<DVector<f64>> = meas_set.points.iter().map(|p| model.h(p)).collect();
    let (yhat_pred, sigma_y) = unscented_moments(&meas_set, &measured, Some(model.r()))?;
    let sigma_xy = cross_covariance(
        &meas_set,
        &meas_set.points,
        &measured,
        &xhat_pred,
        &yhat_pred,
    )?;

    let gain = kalman_gain(&sigma_xy, &sigma_y, "ukf innovation covariance")?;
    let sigma_post = symmetrized(&(&sigma_pred - &gain * &sigma_y * gain.transpose()));

    Ok(UkfPropagation {
        xhat_pred,
        sigma_pred,
        yhat_pred,
        sigma_y,
        sigma_xy,
        gain,
        sigma_post,
    })
}

fn finish_step(
    model: &StateSpaceModel,
    prop: UkfPropagation,
    y_next: &DVector<f64>,
    k_next: usize,
) -> Result<(FilterState, ForwardStepTrace)> {
    let mut innovation = y_next - &prop.yhat_pred;
    model.wrap_innovation(&mut innovation);
    let xhat = &prop.xhat_pred + &prop.gain * innovation;
    if !vector_is_finite(&xhat) {
        return Err(Error::NonFinite {
            context: "forward filter state",
            step: k_next,
        });
    }
    let state = FilterState {
        xhat,
        sigma: prop.sigma_post.clone(),
        k: k_next,
    };
    let trace = ForwardStepTrace {
        xhat_pred: prop.xhat_pred,
        sigma_pred: prop.sigma_pred,
        yhat_pred: prop.yhat_pred,
        sigma_y: prop.sigma_y,
        sigma_xy: prop.sigma_xy,
        gain: prop.gain,
    };
    Ok((state, trace))
}

/// One unscented forward step consuming the measurement `y_next`.
pub fn ukf_step(
    model: &StateSpaceModel,
    state: &FilterState,
    y_next: &DVector<f64>,
    kappa: f64,
) -> Result<(FilterState, ForwardStepTrace)> {
    let prop = ukf_propagate(model, &state.xhat, &state.sigma, kappa)?;
    finish_step(model, prop, y_next, state.k + 1)
}

/// One extended (first-order) forward step consuming the measurement
/// `y_next`. Jacobians come from the model (analytic or finite-difference).
pub fn ekf_step(
    model: &StateSpaceModel,
    state: &FilterState,
    y_next: &DVector<f64>,
) -> Result<(FilterState, ForwardStepTrace)> {
    let f_jac = model.jacobian_f(&state.xhat);
    let xhat_pred = model.f(&state.xhat);
    let sigma_pred = symmetrized(&(&f_jac * &state.sigma * f_jac.transpose())) + model.q();

    let h_jac = model.jacobian_h(&xhat_pred);
    let yhat_pred = model.h(&xhat_pred);
    let sigma_y = symmetrized(&(&h_jac * &sigma_pred * h_jac.transpose())) + model.r();
    let sigma_xy = &sigma_pred * h_jac.transpose();
    let gain = kalman_gain(&sigma_xy, &sigma_y, "ekf innovation covariance")?;
    let sigma_post = symmetrized(&(&sigma_pred - &gain * &sigma_y * gain.transpose()));

    let prop = UkfPropagation {
        xhat_pred,
        sigma_pred,
        yhat_pred,
        sigma_y,
        sigma_xy,
        gain,
        sigma_post,
    };
    finish_step(model, prop, y_next, state.k + 1)
}

/// Fold a forward filter over a trajectory's measurements.
///
/// Returns one (state, trace) pair per measurement; an empty trajectory
/// yields an empty sequence. `kappa` is only meaningful for the unscented
/// kind and ignored by the extended one.
pub fn run_forward_filter(
    model: &StateSpaceModel,
    kind: ForwardFilterKind,
    x0hat: &DVector<f64>,
    sigma0: &DMatrix<f64>,
    kappa: f64,
    trajectory: &Trajectory,
) -> Result<Vec<(FilterState, ForwardStepTrace)>> {
    let mut current = FilterState {
        xhat: x0hat.clone(),
        sigma: symmetrized(sigma0),
        k: 0,
    };
    let mut out = Vec::with_capacity(trajectory.horizon());
    for y in &trajectory.observations {
        let (next, trace) = match kind {
            ForwardFilterKind::Ukf => ukf_step(model, &current, y, kappa)?,
            ForwardFilterKind::Ekf => ekf_step(model, &current, y)?,
        };
        current = next.clone();
        out.push((next, trace));
    }
    Ok(out)
}
