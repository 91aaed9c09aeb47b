//! Inverse filters: the defender's estimators of the adversary's estimate.
//!
//! The defender watches the true state x_k (it is the defender's own state)
//! and a noisy action a_k = g(xhat_k) + eps_k that betrays the adversary's
//! estimate xhat_k. Treating the adversary's filter as part of the plant, the
//! adversary's estimate evolves as
//!
//! ```text
//!   xhat_{k+1} = ftilde(xhat_k, Sigma_k, x_{k+1}, v_{k+1})
//! ```
//!
//! where `ftilde` replays one complete forward-UKF step: it regenerates the
//! forward filter's sigma points from (xhat_k, Sigma_k), recomputes the
//! forward gain from scratch, and applies the measurement y_{k+1} =
//! h(x_{k+1}) + v_{k+1} that the adversary would have seen. The gain is never
//! cached or treated as a parameter; it is a function of the inputs.
//!
//! The measurement noise v_{k+1} enters `ftilde` non-additively, so the
//! unscented inverse filter (IUKF) runs on the augmented state
//! z_k = [xhat_k^T, v_{k+1}^T]^T with block covariance blkdiag(Sigma_bar, R).
//! Two departures from the forward filter follow from that construction: the
//! predicted covariance gets no additive process-noise term (the noise is in
//! the augmentation), and the measurement update through g reuses the
//! propagated points instead of regenerating them.
//!
//! The adversary's actual covariance Sigma_k is not observable; the defender
//! replicates it as Sigma_star by running the forward covariance recursion at
//! its own estimates, and feeds that replica to every sigma point of a step as
//! a shared exogenous input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forward::{kalman_gain, ukf_propagate, FilterState, ForwardFilterKind, UkfPropagation};
use crate::mat::{symmetrized, vector_is_finite};
use crate::model::StateSpaceModel;
use crate::sim::Trajectory;
use crate::unscented::{cross_covariance, generate_sigma_points, unscented_moments};

/// Which inverse filter to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseFilterKind {
    Iukf,
    Iekf,
}

impl InverseFilterKind {
    pub fn label(&self) -> &'static str {
        match self {
            InverseFilterKind::Iukf => "iukf",
            InverseFilterKind::Iekf => "iekf",
        }
    }

    /// The forward machinery this inverse filter internally assumes.
    pub fn compatible_forward(&self) -> ForwardFilterKind {
        match self {
            InverseFilterKind::Iukf => ForwardFilterKind::Ukf,
            InverseFilterKind::Iekf => ForwardFilterKind::Ekf,
        }
    }
}

/// Which estimate anchors the per-step advance of the covariance replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaStarAnchor {
    /// Seed the covariance-only forward recursion at the pre-update estimate
    /// (the default: the replica is advanced "at the previous estimate").
    #[default]
    PreviousEstimate,
    /// Seed it at the just-updated estimate instead.
    UpdatedEstimate,
}

/// Posterior state of an inverse filter after step k.
#[derive(Debug, Clone)]
pub struct InverseFilterState {
    /// Defender's estimate of the adversary's estimate.
    pub xhathat: DVector<f64>,
    /// Its error covariance.
    pub sigma_bar: DMatrix<f64>,
    /// The defender's replica of the adversary's covariance.
    pub sigma_star: DMatrix<f64>,
    /// Time index k.
    pub k: usize,
}

/// The augmented mean and covariance the IUKF samples from:
/// z = [xhathat^T, 0^T]^T, Sigma_z = blkdiag(Sigma_bar, R).
#[derive(Debug, Clone)]
pub struct AugmentedState {
    pub zhat: DVector<f64>,
    pub sigma_z: DMatrix<f64>,
}

impl AugmentedState {
    pub fn new(xhathat: &DVector<f64>, sigma_bar: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        let n_x = xhathat.len();
        let n_y = r.nrows();
        if sigma_bar.nrows() != n_x || sigma_bar.ncols() != n_x {
            return Err(Error::Dimension {
                context: "AugmentedState",
                expected: format!("{n_x}x{n_x} Sigma_bar"),
                got: format!("{}x{}", sigma_bar.nrows(), sigma_bar.ncols()),
            });
        }
        let n_z = n_x + n_y;
        let mut zhat = DVector::zeros(n_z);
        zhat.rows_mut(0, n_x).copy_from(xhathat);
        let mut sigma_z = DMatrix::zeros(n_z, n_z);
        sigma_z.view_mut((0, 0), (n_x, n_x)).copy_from(sigma_bar);
        sigma_z.view_mut((n_x, n_x), (n_y, n_y)).copy_from(r);
        Ok(Self { zhat, sigma_z })
    }
}

/// Intermediate quantities of one inverse step, consumed by the bound
/// recursions and diagnostics.
#[derive(Debug, Clone)]
pub struct InverseStepTrace {
    /// Predicted mean xhathat_{k+1|k}.
    pub xhathat_pred: DVector<f64>,
    /// Predicted covariance (no additive noise term; see module docs).
    pub sigma_bar_pred: DMatrix<f64>,
    /// Predicted action ahat_{k+1|k}.
    pub ahat_pred: DVector<f64>,
    /// Action-innovation covariance (includes Sigma_eps).
    pub sigma_a: DMatrix<f64>,
    /// State-action cross covariance.
    pub sigma_xa: DMatrix<f64>,
    /// Inverse gain.
    pub gain: DMatrix<f64>,
    /// The forward-gain replica of this step (the gain inside ftilde at the
    /// center sigma point, or the replicated EKF gain). Its R-weighted outer
    /// product is the inverse transition's effective process noise.
    pub forward_gain: DMatrix<f64>,
    /// The covariance replica the step started from (Sigma_star at time k).
    pub sigma_star_prev: DMatrix<f64>,
}

/// Initial condition of an inverse filter.
#[derive(Debug, Clone)]
pub struct InverseInit {
    pub xhathat0: DVector<f64>,
    pub sigma_bar0: DMatrix<f64>,
    /// Replica seed; conventionally the forward filter's published Sigma_0.
    pub sigma_star0: DMatrix<f64>,
}

impl InverseInit {
    pub fn initial_state(&self) -> InverseFilterState {
        InverseFilterState {
            xhathat: self.xhathat0.clone(),
            sigma_bar: symmetrized(&self.sigma_bar0),
            sigma_star: symmetrized(&self.sigma_star0),
            k: 0,
        }
    }
}

fn ftilde_core(
    model: &StateSpaceModel,
    xhat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    x_next: &DVector<f64>,
    v: &DVector<f64>,
    kappa_fwd: f64,
) -> Result<(DVector<f64>, UkfPropagation)> {
    let prop = ukf_propagate(model, xhat, sigma, kappa_fwd)?;
    let implied_y = model.h(x_next) + v;
    let mut innovation = implied_y - &prop.yhat_pred;
    model.wrap_innovation(&mut innovation);
    let next = &prop.xhat_pred + &prop.gain * innovation;
    Ok((next, prop))
}

/// The inverse transition map: one full forward-UKF step replayed as a
/// deterministic function of (xhat, Sigma, x_next, v).
///
/// Sigma points and the forward gain are recomputed from the arguments on
/// every call; nothing is cached between evaluations.
pub fn evaluate_ftilde(
    model: &StateSpaceModel,
    xhat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    x_next: &DVector<f64>,
    v: &DVector<f64>,
    kappa_fwd: f64,
) -> Result<DVector<f64>> {
    Ok(ftilde_core(model, xhat, sigma, x_next, v, kappa_fwd)?.0)
}

/// Advance the covariance replica one step: the covariance-only part of a
/// forward-UKF step seeded at `(estimate, sigma_star)`. Consumes no
/// observation.
pub fn update_sigma_star(
    model: &StateSpaceModel,
    estimate: &DVector<f64>,
    sigma_star: &DMatrix<f64>,
    kappa_fwd: f64,
) -> Result<DMatrix<f64>> {
    Ok(ukf_propagate(model, estimate, sigma_star, kappa_fwd)?.sigma_post)
}

/// One unscented inverse step with the default replica anchoring.
pub fn iukf_step(
    model: &StateSpaceModel,
    state: &InverseFilterState,
    x_next: &DVector<f64>,
    a_next: &DVector<f64>,
    kappa_fwd: f64,
    kappa_inv: f64,
) -> Result<(InverseFilterState, InverseStepTrace)> {
    iukf_step_with_anchor(
        model,
        state,
        x_next,
        a_next,
        kappa_fwd,
        kappa_inv,
        SigmaStarAnchor::PreviousEstimate,
    )
}

/// One unscented inverse step with an explicit replica anchoring.
pub fn iukf_step_with_anchor(
    model: &StateSpaceModel,
    state: &InverseFilterState,
    x_next: &DVector<f64>,
    a_next: &DVector<f64>,
    kappa_fwd: f64,
    kappa_inv: f64,
    anchor: SigmaStarAnchor,
) -> Result<(InverseFilterState, InverseStepTrace)> {
    let dims = model.dims();
    let (n_x, n_y) = (dims.n_x, dims.n_y);

    let aug = AugmentedState::new(&state.xhathat, &state.sigma_bar, model.r())?;
    let set = generate_sigma_points(&aug.zhat, &aug.sigma_z, kappa_inv)?;

    // Time update: every augmented point goes through the full transition map
    // with the shared covariance replica; the center point doubles as the
    // forward-step replica whose gain the bound recursion needs.
    let mut propagated = Vec::with_capacity(set.len());
    let mut forward_gain = None;
    for (j, z) in set.points.iter().enumerate() {
        let x_part = z.rows(0, n_x).into_owned();
        let v_part = z.rows(n_x, n_y).into_owned();
        let (value, prop) = ftilde_core(
            model,
            &x_part,
            &state.sigma_star,
            x_next,
            &v_part,
            kappa_fwd,
        )?;
        if j == 0 {
            forward_gain = Some(prop.gain);
        }
        propagated.push(value);
    }
    let forward_gain = forward_gain.expect("sigma set always has a center point");

    // No additive process noise here: the measurement noise driving the
    // transition is already inside the augmentation.
    let (xhathat_pred, sigma_bar_pred) = unscented_moments(&set, &propagated, None)?;

    // Measurement update through g, reusing the propagated points.
    let actions: Vec<DVector<f64>> = propagated.iter().map(|s| model.g(s)).collect();
    let (ahat_pred, sigma_a) = unscented_moments(&set, &actions, Some(model.sigma_eps()))?;
    let sigma_xa = cross_covariance(&set, &propagated, &actions, &xhathat_pred, &ahat_pred)?;
    let gain = kalman_gain(&sigma_xa, &sigma_a, "iukf action-innovation covariance")?;

    let innovation = a_next - &ahat_pred;
    let xhathat = &xhathat_pred + &gain * innovation;
    if !vector_is_finite(&xhathat) {
        return Err(Error::NonFinite {
            context: "inverse filter state",
            step: state.k + 1,
        });
    }
    let sigma_bar = symmetrized(&(&sigma_bar_pred - &gain * &sigma_a * gain.transpose()));

    let anchor_estimate = match anchor {
        SigmaStarAnchor::PreviousEstimate => &state.xhathat,
        SigmaStarAnchor::UpdatedEstimate => &xhathat,
    };
    let sigma_star = update_sigma_star(model, anchor_estimate, &state.sigma_star, kappa_fwd)?;

    let next = InverseFilterState {
        xhathat,
        sigma_bar,
        sigma_star,
        k: state.k + 1,
    };
    let trace = InverseStepTrace {
        xhathat_pred,
        sigma_bar_pred,
        ahat_pred,
        sigma_a,
        sigma_xa,
        gain,
        forward_gain,
        sigma_star_prev: state.sigma_star.clone(),
    };
    Ok((next, trace))
}

/// One extended inverse step.
///
/// The forward gain is replicated by running an EKF covariance recursion at
/// the defender's own estimates (held in `sigma_star`). The inverse
/// transition is the EKF analogue of `ftilde` with that gain frozen for the
/// step:
///
/// ```text
///   xhathat_{k+1|k} = f(xhathat_k) + K*(h(x_{k+1}) - h(f(xhathat_k)))
/// ```
///
/// with transition Jacobian (I - K* H) F and process noise K* R K*^T.
pub fn iekf_step(
    model: &StateSpaceModel,
    state: &InverseFilterState,
    x_next: &DVector<f64>,
    a_next: &DVector<f64>,
) -> Result<(InverseFilterState, InverseStepTrace)> {
    // Replicated forward EKF covariance recursion at the defender's estimate.
    let f_jac = model.jacobian_f(&state.xhathat);
    let f_pred = model.f(&state.xhathat);
    let sigma_star_pred =
        symmetrized(&(&f_jac * &state.sigma_star * f_jac.transpose())) + model.q();
    let h_jac = model.jacobian_h(&f_pred);
    let s_fwd = symmetrized(&(&h_jac * &sigma_star_pred * h_jac.transpose())) + model.r();
    let forward_gain = kalman_gain(
        &(&sigma_star_pred * h_jac.transpose()),
        &s_fwd,
        "iekf replicated forward innovation covariance",
    )?;
    let sigma_star =
        symmetrized(&(&sigma_star_pred - &forward_gain * &s_fwd * forward_gain.transpose()));

    // Inverse prediction through the frozen-gain transition.
    let mut implied_innovation = model.h(x_next) - model.h(&f_pred);
    model.wrap_innovation(&mut implied_innovation);
    let xhathat_pred = &f_pred + &forward_gain * implied_innovation;
    let transition_jac =
        (DMatrix::identity(f_jac.nrows(), f_jac.ncols()) - &forward_gain * &h_jac) * &f_jac;
    let process_noise = symmetrized(&(&forward_gain * model.r() * forward_gain.transpose()));
    let sigma_bar_pred =
        symmetrized(&(&transition_jac * &state.sigma_bar * transition_jac.transpose()))
            + process_noise;

    // Measurement update through g.
    let g_jac = model.jacobian_g(&xhathat_pred);
    let ahat_pred = model.g(&xhathat_pred);
    let sigma_a = symmetrized(&(&g_jac * &sigma_bar_pred * g_jac.transpose())) + model.sigma_eps();
    let sigma_xa = &sigma_bar_pred * g_jac.transpose();
    let gain = kalman_gain(&sigma_xa, &sigma_a, "iekf action-innovation covariance")?;
    let xhathat = &xhathat_pred + &gain * (a_next - &ahat_pred);
    if !vector_is_finite(&xhathat) {
        return Err(Error::NonFinite {
            context: "inverse filter state",
            step: state.k + 1,
        });
    }
    let sigma_bar = symmetrized(&(&sigma_bar_pred - &gain * &sigma_a * gain.transpose()));

    let next = InverseFilterState {
        xhathat,
        sigma_bar,
        sigma_star,
        k: state.k + 1,
    };
    let trace = InverseStepTrace {
        xhathat_pred,
        sigma_bar_pred,
        ahat_pred,
        sigma_a,
        sigma_xa,
        gain,
        forward_gain,
        sigma_star_prev: state.sigma_star.clone(),
    };
    Ok((next, trace))
}

/// Options shared by a whole inverse-filter run.
#[derive(Debug, Clone, Copy)]
pub struct InverseOptions {
    /// The defender's assumed forward spread parameter (may differ from the
    /// adversary's true one; only meaningful for the unscented kind).
    pub assumed_kappa_fwd: f64,
    /// Spread parameter for the augmented sigma points.
    pub kappa_inv: f64,
    /// Replica anchoring.
    pub anchor: SigmaStarAnchor,
}

/// Result of folding an inverse filter over a run.
#[derive(Debug, Clone)]
pub struct InverseRun {
    pub states: Vec<InverseFilterState>,
    pub traces: Vec<InverseStepTrace>,
    /// Per-step estimation error xhathat_k - xhat_k against the supplied
    /// forward estimates (measurement only; never fed back into the filter).
    pub errors: Vec<DVector<f64>>,
}

/// Fold an inverse filter over `(x_{k+1}, a_{k+1})` pairs.
///
/// `assumed_forward_kind` documents which forward machinery the defender
/// assumes; it must be the kind the chosen inverse filter replicates
/// (unscented for IUKF, extended for IEKF) — the mismatch experiments vary
/// which *true* forward filter produced `forward_estimates` and
/// `defender_obs`, not the internal machinery.
///
/// `forward_estimates` are used only to record per-step errors.
#[allow(clippy::too_many_arguments)]
pub fn run_inverse_filter(
    model: &StateSpaceModel,
    inverse_kind: InverseFilterKind,
    assumed_forward_kind: ForwardFilterKind,
    options: &InverseOptions,
    init: &InverseInit,
    trajectory: &Trajectory,
    forward_estimates: &[FilterState],
    defender_obs: &[DVector<f64>],
) -> Result<InverseRun> {
    if assumed_forward_kind != inverse_kind.compatible_forward() {
        return Err(Error::InvalidConfiguration {
            reason: format!(
                "inverse kind {:?} replicates a {:?} forward filter; assumed {:?}",
                inverse_kind,
                inverse_kind.compatible_forward(),
                assumed_forward_kind
            ),
        });
    }
    let horizon = trajectory.horizon();
    if forward_estimates.len() != horizon || defender_obs.len() != horizon {
        return Err(Error::Dimension {
            context: "run_inverse_filter",
            expected: format!("{horizon} forward estimates and defender observations"),
            got: format!("{} and {}", forward_estimates.len(), defender_obs.len()),
        });
    }

    let mut current = init.initial_state();
    let mut states = Vec::with_capacity(horizon);
    let mut traces = Vec::with_capacity(horizon);
    let mut errors = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let x_next = &trajectory.states[k + 1];
        let a_next = &defender_obs[k];
        let (next, trace) = match inverse_kind {
            InverseFilterKind::Iukf => iukf_step_with_anchor(
                model,
                &current,
                x_next,
                a_next,
                options.assumed_kappa_fwd,
                options.kappa_inv,
                options.anchor,
            )?,
            InverseFilterKind::Iekf => iekf_step(model, &current, x_next, a_next)?,
        };
        errors.push(&next.xhathat - &forward_estimates[k].xhat);
        current = next.clone();
        states.push(next);
        traces.push(trace);
    }
    Ok(InverseRun {
        states,
        traces,
        errors,
    })
}
