//! State-space model description shared by the simulator and all filters.
//!
//! A model is the triple of maps
//!
//! ```text
//!   x_{k+1} = f(x_k) + w_k            w ~ N(0, Q)     (state transition)
//!   y_k     = h(x_k) + v_k            v ~ N(0, R)     (adversary measurement)
//!   a_k     = g(xhat_k) + eps_k       eps ~ N(0, Sigma_eps)  (observed action)
//! ```
//!
//! where the third map is the defender's view: the adversary acts on its state
//! *estimate*, and the defender observes that action in noise. All maps are
//! deterministic; noise is always additive and injected by the caller.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jacobian::{central_jacobian, FILTER_FD_STEP};
use crate::mat::{max_abs, max_asymmetry, symmetrized, wrap_angle};

/// State, measurement, and action dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// State dimension n_x.
    pub n_x: usize,
    /// Adversary measurement dimension n_y.
    pub n_y: usize,
    /// Defender observation (action) dimension n_a.
    pub n_a: usize,
}

/// A deterministic vector map used for f, h, or g.
pub type StateMap = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// An analytic Jacobian for one of the maps.
pub type JacobianMap = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Nonlinear state-space model with additive Gaussian noise on every channel.
pub struct StateSpaceModel {
    dims: Dims,
    f: StateMap,
    h: StateMap,
    g: StateMap,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    sigma_eps: DMatrix<f64>,
    jac_f: Option<JacobianMap>,
    jac_h: Option<JacobianMap>,
    jac_g: Option<JacobianMap>,
    angular_obs: Vec<usize>,
}

fn check_covariance(m: &DMatrix<f64>, n: usize, context: &'static str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension {
            context,
            expected: format!("{n}x{n}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let asym = max_asymmetry(m);
    if asym > 1e-9 * (1.0 + max_abs(m)) {
        return Err(Error::NotSymmetric {
            context,
            asymmetry: asym,
        });
    }
    // Positive semidefiniteness, with a little slack for rounding. Strict
    // definiteness is deliberately not required: degenerate noise channels
    // (including exactly zero ones) are legitimate and are handled by the
    // factorization ladder downstream.
    if Cholesky::new(symmetrized(m)).is_none() {
        let eig = symmetrized(m).symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-8 * (1.0 + max_abs(m)) {
            return Err(Error::NotPositiveSemidefinite {
                context,
                min_eigenvalue: min,
            });
        }
    }
    Ok(())
}

impl StateSpaceModel {
    /// Build a model from its maps and noise covariances.
    ///
    /// Covariances are validated for shape, symmetry, and positive
    /// semidefiniteness. The maps themselves are trusted to be deterministic
    /// and dimension-consistent; the accessors assert dimensions on use.
    pub fn new(
        dims: Dims,
        f: StateMap,
        h: StateMap,
        g: StateMap,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        sigma_eps: DMatrix<f64>,
    ) -> Result<Self> {
        if dims.n_x == 0 || dims.n_y == 0 || dims.n_a == 0 {
            return Err(Error::InvalidConfiguration {
                reason: "all model dimensions must be positive".to_string(),
            });
        }
        check_covariance(&q, dims.n_x, "process covariance Q")?;
        check_covariance(&r, dims.n_y, "measurement covariance R")?;
        check_covariance(&sigma_eps, dims.n_a, "action covariance Sigma_eps")?;
        Ok(Self {
            dims,
            f,
            h,
            g,
            q: symmetrized(&q),
            r: symmetrized(&r),
            sigma_eps: symmetrized(&sigma_eps),
            jac_f: None,
            jac_h: None,
            jac_g: None,
            angular_obs: Vec::new(),
        })
    }

    /// Attach an analytic Jacobian for f.
    pub fn with_jacobian_f(mut self, jac: JacobianMap) -> Self {
        self.jac_f = Some(jac);
        self
    }

    /// Attach an analytic Jacobian for h.
    pub fn with_jacobian_h(mut self, jac: JacobianMap) -> Self {
        self.jac_h = Some(jac);
        self
    }

    /// Attach an analytic Jacobian for g.
    pub fn with_jacobian_g(mut self, jac: JacobianMap) -> Self {
        self.jac_g = Some(jac);
        self
    }

    /// Mark a measurement component as an angle; innovations in that
    /// component are wrapped to (-pi, pi] by every filter.
    pub fn with_angular_observation(mut self, index: usize) -> Self {
        assert!(
            index < self.dims.n_y,
            "angular observation index {index} out of range for n_y = {}",
            self.dims.n_y
        );
        self.angular_obs.push(index);
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn sigma_eps(&self) -> &DMatrix<f64> {
        &self.sigma_eps
    }

    /// State transition x -> f(x).
    pub fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dims.n_x);
        let out = (self.f)(x);
        debug_assert_eq!(out.len(), self.dims.n_x);
        out
    }

    /// Adversary measurement map x -> h(x).
    pub fn h(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dims.n_x);
        let out = (self.h)(x);
        debug_assert_eq!(out.len(), self.dims.n_y);
        out
    }

    /// Defender observation map xhat -> g(xhat).
    pub fn g(&self, xhat: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(xhat.len(), self.dims.n_x);
        let out = (self.g)(xhat);
        debug_assert_eq!(out.len(), self.dims.n_a);
        out
    }

    /// Jacobian of f at x: analytic when attached, central finite
    /// differences otherwise.
    pub fn jacobian_f(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_f {
            Some(j) => j(x),
            None => central_jacobian(|v| (self.f)(v), x, FILTER_FD_STEP),
        }
    }

    /// Jacobian of h at x.
    pub fn jacobian_h(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_h {
            Some(j) => j(x),
            None => central_jacobian(|v| (self.h)(v), x, FILTER_FD_STEP),
        }
    }

    /// Jacobian of g at xhat.
    pub fn jacobian_g(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_g {
            Some(j) => j(x),
            None => central_jacobian(|v| (self.g)(v), x, FILTER_FD_STEP),
        }
    }

    /// Wrap the angular components of a measurement innovation to (-pi, pi].
    pub fn wrap_innovation(&self, innovation: &mut DVector<f64>) {
        for &i in &self.angular_obs {
            innovation[i] = wrap_angle(innovation[i]);
        }
    }

    /// Indices of angular measurement components.
    pub fn angular_observations(&self) -> &[usize] {
        &self.angular_obs
    }
}

impl std::fmt::Debug for StateSpaceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateSpaceModel")
            .field("dims", &self.dims)
            .field("angular_obs", &self.angular_obs)
            .finish_non_exhaustive()
    }
}
