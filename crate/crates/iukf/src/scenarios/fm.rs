//! Frequency-demodulation benchmark: a two-state linear plant (message
//! amplitude and integrated phase) observed through a unit-power quadrature
//! pair, with the adversary's action revealing the squared amplitude
//! estimate.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{ComponentInit, InitialStateDist, ScenarioConfig, ScenarioInit, ScenarioParams};
use crate::model::{Dims, StateSpaceModel};

/// Sampling interval.
pub const FM_T: f64 = 2.0 * PI / 16.0;
/// Message time constant.
pub const FM_BETA: f64 = 100.0;

/// Constants of the demodulator scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FmOptions {
    /// The (2,1) transition entry appears with inconsistent sign conventions
    /// in the literature. `false` (default) uses the classical demodulator
    /// value beta*(e^(-T/beta) - 1); `true` uses the alternative reading
    /// -beta*e^(-T/beta) - 1.
    pub literal_transition_entry: bool,
}

/// The state-transition matrix for the chosen reading of the (2,1) entry.
pub fn fm_transition_matrix(options: &FmOptions) -> DMatrix<f64> {
    let decay = (-FM_T / FM_BETA).exp();
    let a21 = if options.literal_transition_entry {
        -FM_BETA * decay - 1.0
    } else {
        FM_BETA * (decay - 1.0)
    };
    DMatrix::from_row_slice(2, 2, &[decay, 0.0, a21, 1.0])
}

/// Demodulator model and its experiment configuration (default reading).
pub fn fm_demodulator_model() -> (StateSpaceModel, ScenarioConfig) {
    fm_demodulator_model_with(&FmOptions::default())
}

/// Demodulator model and configuration with explicit options.
pub fn fm_demodulator_model_with(options: &FmOptions) -> (StateSpaceModel, ScenarioConfig) {
    let a = fm_transition_matrix(options);
    let a_f = a.clone();

    // Process noise enters through the gain [1, -beta]^T with variance 0.01.
    let noise_gain = DVector::from_vec(vec![1.0, -FM_BETA]);
    let q = 0.01 * &noise_gain * noise_gain.transpose();

    let sqrt2 = 2.0f64.sqrt();
    let model = StateSpaceModel::new(
        Dims {
            n_x: 2,
            n_y: 2,
            n_a: 1,
        },
        Box::new(move |x| &a_f * x),
        Box::new(move |x| {
            let theta = x[1];
            DVector::from_vec(vec![sqrt2 * theta.sin(), sqrt2 * theta.cos()])
        }),
        Box::new(|x| DVector::from_vec(vec![x[0] * x[0]])),
        q,
        DMatrix::identity(2, 2),
        DMatrix::from_vec(1, 1, vec![5.0]),
    )
    .expect("demodulator constants form a valid model");

    let a_jac = fm_transition_matrix(options);
    let model = model
        .with_jacobian_f(Box::new(move |_| a_jac.clone()))
        .with_jacobian_h(Box::new(move |x| {
            let theta = x[1];
            DMatrix::from_row_slice(2, 2, &[0.0, sqrt2 * theta.cos(), 0.0, -sqrt2 * theta.sin()])
        }))
        .with_jacobian_g(Box::new(|x| {
            DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 0.0])
        }));

    let random_init = InitialStateDist::Components(vec![
        ComponentInit::Normal {
            mean: 0.0,
            std: 1.0,
        },
        ComponentInit::Uniform { low: -PI, high: PI },
    ]);
    let config = ScenarioConfig {
        name: "fm".to_string(),
        params: ScenarioParams::Fm(*options),
        init: ScenarioInit {
            x0: random_init.clone(),
            xhat0: random_init,
            sigma0: DMatrix::identity(2, 2) * 10.0,
            xhathat0: InitialStateDist::TrueState,
            sigma_bar0: DMatrix::identity(2, 2) * 5.0,
            kappa: 1.0,
            kappa_inv: 1.0,
            assumed_kappa: 2.0,
        },
        horizon: 100,
        runs: 500,
        error_indices: vec![0, 1],
    };
    (model, config)
}
