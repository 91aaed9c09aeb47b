//! Linear toy scenario: an affine system whose exact Kalman solutions are
//! known in closed form, used to validate the sigma-point paths against the
//! textbook recursions.

use nalgebra::{DMatrix, DVector};

use super::{ComponentInit, InitialStateDist, ScenarioConfig, ScenarioInit, ScenarioParams};
use crate::error::{Error, Result};
use crate::model::{Dims, StateSpaceModel};

/// The system matrices of a linear scenario, kept for oracle construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearToyMatrices {
    pub a: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
}

/// Build an affine model x' = Ax + w, y = Hx + v, a = Gxhat + eps from
/// explicit matrices, with a configuration sized for oracle runs.
pub fn linear_toy_model(
    dims: Dims,
    a: DMatrix<f64>,
    h_mat: DMatrix<f64>,
    g_mat: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    sigma_eps: DMatrix<f64>,
) -> Result<(StateSpaceModel, ScenarioConfig)> {
    let n = dims.n_x;
    if a.nrows() != n
        || a.ncols() != n
        || h_mat.ncols() != n
        || h_mat.nrows() != dims.n_y
        || g_mat.ncols() != n
        || g_mat.nrows() != dims.n_a
    {
        return Err(Error::Dimension {
            context: "linear_toy_model",
            expected: format!("A {n}x{n}, H {}x{n}, G {}x{n}", dims.n_y, dims.n_a),
            got: format!(
                "A {}x{}, H {}x{}, G {}x{}",
                a.nrows(),
                a.ncols(),
                h_mat.nrows(),
                h_mat.ncols(),
                g_mat.nrows(),
                g_mat.ncols()
            ),
        });
    }
    let matrices = LinearToyMatrices {
        a: a.clone(),
        h: h_mat.clone(),
        g: g_mat.clone(),
        q: q.clone(),
        r: r.clone(),
        sigma_eps: sigma_eps.clone(),
    };

    let (a_f, a_j) = (a.clone(), a);
    let (h_f, h_j) = (h_mat.clone(), h_mat);
    let (g_f, g_j) = (g_mat.clone(), g_mat);
    let model = StateSpaceModel::new(
        dims,
        Box::new(move |x| &a_f * x),
        Box::new(move |x| &h_f * x),
        Box::new(move |x| &g_f * x),
        q,
        r,
        sigma_eps,
    )?
    .with_jacobian_f(Box::new(move |_| a_j.clone()))
    .with_jacobian_h(Box::new(move |_| h_j.clone()))
    .with_jacobian_g(Box::new(move |_| g_j.clone()));

    // Initial draws are chosen so every claimed covariance equals the true
    // covariance of the corresponding error: the truth and the forward
    // estimate are drawn independently with per-component variance 0.5, so
    // the forward error has covariance I; the inverse filter pins its
    // estimate at the prior mean, leaving error covariance 0.5 I.
    let half_std = 0.5f64.sqrt();
    let spread = |_| ComponentInit::Normal {
        mean: 0.0,
        std: half_std,
    };
    let config = ScenarioConfig {
        name: "linear".to_string(),
        params: ScenarioParams::Linear(matrices),
        init: ScenarioInit {
            x0: InitialStateDist::Components((0..n).map(spread).collect()),
            xhat0: InitialStateDist::Components((0..n).map(spread).collect()),
            sigma0: DMatrix::identity(n, n),
            xhathat0: InitialStateDist::Fixed(DVector::zeros(n)),
            sigma_bar0: DMatrix::identity(n, n) * 0.5,
            kappa: 1.0,
            kappa_inv: 1.0,
            assumed_kappa: 1.0,
        },
        horizon: 200,
        runs: 200,
        error_indices: (0..n).collect(),
    };
    Ok((model, config))
}

/// The default three-state instance used by tests and the bundled config.
pub fn default_linear_toy() -> Result<(StateSpaceModel, ScenarioConfig)> {
    linear_toy_model(
        Dims {
            n_x: 3,
            n_y: 2,
            n_a: 1,
        },
        DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.0, 0.0, 0.7, 0.2, 0.1, 0.0, 0.6]),
        DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
        DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]),
        DMatrix::identity(3, 3) * 0.5,
        DMatrix::identity(2, 2),
        DMatrix::from_vec(1, 1, vec![2.0]),
    )
}
