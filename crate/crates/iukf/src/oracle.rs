//! Closed-form linear-Gaussian reference filters.
//!
//! These are deliberately naive textbook implementations — plain matrix
//! arithmetic, no sigma points, no shared code with the main filter paths —
//! so the equivalence tests (`unscented == Kalman on affine systems`) compare
//! two independent derivations rather than one implementation with itself.

use nalgebra::{DMatrix, DVector};

use crate::mat::symmetrized;

/// x_{k+1} = A x_k + w, y_k = H x_k + v.
#[derive(Debug, Clone)]
pub struct LinearKalman {
    pub a: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Posterior mean/covariance plus the gain that produced them.
#[derive(Debug, Clone)]
pub struct LinearStep {
    pub xhat: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub xhat_pred: DVector<f64>,
    pub sigma_pred: DMatrix<f64>,
}

impl LinearKalman {
    /// One predict-update cycle driven by the measurement y_{k+1}.
    pub fn step(&self, xhat: &DVector<f64>, sigma: &DMatrix<f64>, y: &DVector<f64>) -> LinearStep {
        let xhat_pred = &self.a * xhat;
        let sigma_pred = symmetrized(&(&self.a * sigma * self.a.transpose())) + &self.q;
        let s = symmetrized(&(&self.h * &sigma_pred * self.h.transpose())) + &self.r;
        let gain = &sigma_pred
            * self.h.transpose()
            * s.clone()
                .try_inverse()
                .expect("innovation covariance invertible");
        let xhat_post = &xhat_pred + &gain * (y - &self.h * &xhat_pred);
        let sigma_post = symmetrized(&(&sigma_pred - &gain * &s * gain.transpose()));
        LinearStep {
            xhat: xhat_post,
            sigma: sigma_post,
            gain,
            xhat_pred,
            sigma_pred,
        }
    }

    /// The estimate-independent covariance/gain sequence over a horizon.
    pub fn covariance_sequence(
        &self,
        sigma0: &DMatrix<f64>,
        horizon: usize,
    ) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        let mut out = Vec::with_capacity(horizon);
        let mut sigma = sigma0.clone();
        for _ in 0..horizon {
            let step = self.step(
                &DVector::zeros(self.a.nrows()),
                &sigma,
                &DVector::zeros(self.h.nrows()),
            );
            sigma = step.sigma.clone();
            out.push((step.sigma, step.gain));
        }
        out
    }
}

/// Inverse Kalman filter for the linear case.
///
/// The forward estimate obeys the exact linear recursion
///
/// ```text
///   xhat_{k+1} = (I - K_{k+1} H) A xhat_k + K_{k+1} H x_{k+1} + K_{k+1} v_{k+1}
/// ```
///
/// whose gain sequence depends only on covariances and is therefore exactly
/// replicable by the defender. A Kalman filter on that recursion, observing
/// a_k = G xhat_k + eps_k, is the closed-form inverse filter.
#[derive(Debug, Clone)]
pub struct LinearInverseKalman {
    pub forward: LinearKalman,
    pub g: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
}

/// One inverse step's outputs, including the replicated forward gain.
#[derive(Debug, Clone)]
pub struct LinearInverseStep {
    pub xhathat: DVector<f64>,
    pub sigma_bar: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub forward_gain: DMatrix<f64>,
    pub sigma_star: DMatrix<f64>,
    pub xhathat_pred: DVector<f64>,
    pub sigma_bar_pred: DMatrix<f64>,
}

impl LinearInverseKalman {
    /// One inverse cycle. `sigma_star` is the replicated forward covariance
    /// entering the step; `x_next` the defender's own (exactly known) state at
    /// k+1; `a_next` the observed action.
    pub fn step(
        &self,
        xhathat: &DVector<f64>,
        sigma_bar: &DMatrix<f64>,
        sigma_star: &DMatrix<f64>,
        x_next: &DVector<f64>,
        a_next: &DVector<f64>,
    ) -> LinearInverseStep {
        let a = &self.forward.a;
        let h = &self.forward.h;
        let n = a.nrows();

        // Replicate the forward covariance/gain one step.
        let sigma_star_pred = symmetrized(&(a * sigma_star * a.transpose())) + &self.forward.q;
        let s_fwd = symmetrized(&(h * &sigma_star_pred * h.transpose())) + &self.forward.r;
        let forward_gain = &sigma_star_pred
            * h.transpose()
            * s_fwd
                .clone()
                .try_inverse()
                .expect("forward innovation invertible");
        let sigma_star_post =
            symmetrized(&(&sigma_star_pred - &forward_gain * &s_fwd * forward_gain.transpose()));

        // Inverse transition: mean through the replicated recursion, noise
        // shaped by the forward gain.
        let a_bar = (DMatrix::identity(n, n) - &forward_gain * h) * a;
        let xhathat_pred = &a_bar * xhathat + &forward_gain * (h * x_next);
        let q_bar = symmetrized(&(&forward_gain * &self.forward.r * forward_gain.transpose()));
        let sigma_bar_pred = symmetrized(&(&a_bar * sigma_bar * a_bar.transpose())) + &q_bar;

        // Action update.
        let s_a = symmetrized(&(&self.g * &sigma_bar_pred * self.g.transpose())) + &self.sigma_eps;
        let gain = &sigma_bar_pred
            * self.g.transpose()
            * s_a
                .clone()
                .try_inverse()
                .expect("action innovation invertible");
        let xhathat_post = &xhathat_pred + &gain * (a_next - &self.g * &xhathat_pred);
        let sigma_bar_post = symmetrized(&(&sigma_bar_pred - &gain * &s_a * gain.transpose()));

        LinearInverseStep {
            xhathat: xhathat_post,
            sigma_bar: sigma_bar_post,
            gain,
            forward_gain,
            sigma_star: sigma_star_post,
            xhathat_pred,
            sigma_bar_pred,
        }
    }
}
