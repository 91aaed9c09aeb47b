//! Benchmark scenarios: concrete models plus the experiment constants that
//! accompany them (initial draws, spread parameters, run counts).

pub mod fm;
pub mod linear;
pub mod reentry;

pub use fm::{fm_demodulator_model, fm_demodulator_model_with, FmOptions};
pub use linear::{default_linear_toy, linear_toy_model, LinearToyMatrices};
pub use reentry::{reentry_model, ReentryConstants};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::StateSpaceModel;

/// Per-component initial draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentInit {
    Fixed(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl ComponentInit {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ComponentInit::Fixed(v) => v,
            ComponentInit::Normal { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
            ComponentInit::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

/// How an initial vector is produced at the start of each run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateDist {
    /// The same vector every run.
    Fixed(DVector<f64>),
    /// Independent per-component draws.
    Components(Vec<ComponentInit>),
    /// Copy of the realized initial true state (defender-side knowledge).
    TrueState,
}

impl InitialStateDist {
    /// Draw one realization. `realized_x0` supplies the true initial state
    /// for the `TrueState` variant.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        realized_x0: Option<&DVector<f64>>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        match self {
            InitialStateDist::Fixed(v) => Ok(v.clone()),
            InitialStateDist::Components(cs) => Ok(DVector::from_iterator(
                cs.len(),
                cs.iter().map(|c| c.sample(rng)),
            )),
            InitialStateDist::TrueState => {
                realized_x0
                    .cloned()
                    .ok_or_else(|| Error::InvalidConfiguration {
                        reason: "initial distribution references the realized true state, \
                             which is not available in this context"
                            .to_string(),
                    })
            }
        }
    }

    /// Dimension, when determined by the description itself.
    pub fn dim(&self) -> Option<usize> {
        match self {
            InitialStateDist::Fixed(v) => Some(v.len()),
            InitialStateDist::Components(cs) => Some(cs.len()),
            InitialStateDist::TrueState => None,
        }
    }
}

/// Initial conditions and spread parameters for one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioInit {
    /// True initial state.
    pub x0: InitialStateDist,
    /// Forward filter's initial estimate.
    pub xhat0: InitialStateDist,
    /// Forward filter's initial covariance.
    pub sigma0: DMatrix<f64>,
    /// Inverse filter's initial estimate of the forward estimate.
    pub xhathat0: InitialStateDist,
    /// Inverse filter's initial covariance.
    pub sigma_bar0: DMatrix<f64>,
    /// True forward spread parameter.
    pub kappa: f64,
    /// Inverse (augmented) spread parameter.
    pub kappa_inv: f64,
    /// The forward spread parameter the defender assumes inside the inverse
    /// filter; may deliberately differ from `kappa`.
    pub assumed_kappa: f64,
}

/// Scenario-specific constants, kept alongside the generic configuration.
#[derive(Debug, Clone)]
pub enum ScenarioParams {
    Fm(FmOptions),
    Reentry(ReentryConstants),
    Linear(LinearToyMatrices),
}

/// A scenario: model constants, initial conditions, and experiment sizes.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub params: ScenarioParams,
    pub init: ScenarioInit,
    /// Steps per run.
    pub horizon: usize,
    /// Monte Carlo run count.
    pub runs: usize,
    /// State components entering the reported error metric (e.g. positions
    /// only); the squared errors of these components are summed.
    pub error_indices: Vec<usize>,
}

impl ScenarioConfig {
    /// Dimension-consistency check against the model this config accompanies.
    pub fn validate(&self, model: &StateSpaceModel) -> Result<()> {
        let n = model.dims().n_x;
        let check_dist = |d: &InitialStateDist, what: &str| -> Result<()> {
            if let Some(dim) = d.dim() {
                if dim != n {
                    return Err(Error::InvalidConfiguration {
                        reason: format!("{what} has dimension {dim}, model state is {n}"),
                    });
                }
            }
            Ok(())
        };
        check_dist(&self.init.x0, "initial state distribution")?;
        check_dist(&self.init.xhat0, "forward initial estimate")?;
        check_dist(&self.init.xhathat0, "inverse initial estimate")?;
        for (m, what) in [
            (&self.init.sigma0, "forward initial covariance"),
            (&self.init.sigma_bar0, "inverse initial covariance"),
        ] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidConfiguration {
                    reason: format!("{what} is {}x{}, model state is {n}", m.nrows(), m.ncols()),
                });
            }
        }
        for &i in &self.error_indices {
            if i >= n {
                return Err(Error::InvalidConfiguration {
                    reason: format!("error metric index {i} out of range for state dim {n}"),
                });
            }
        }
        if self.horizon == 0 || self.runs == 0 {
            return Err(Error::InvalidConfiguration {
                reason: "horizon and run count must be positive".to_string(),
            });
        }
        Ok(())
    }
}
