//! Trajectory simulation and reproducible noise streams.
//!
//! Reproducibility discipline: every Monte Carlo run owns one logical RNG,
//! split into fixed substreams (process noise, measurement noise, defender
//! noise, initial draws). The substreams are independent ChaCha streams of the
//! same seeded generator, so adding or removing consumers on one channel
//! (e.g. running extra inverse filters, which only touch the defender stream)
//! can never perturb the draws on another.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mat::{symmetrized, vector_is_finite};
use crate::model::StateSpaceModel;

/// Draws correlated Gaussian vectors with a fixed covariance.
///
/// The covariance is factored once: by Cholesky when positive definite,
/// otherwise through a symmetric eigendecomposition with negative eigenvalues
/// clamped to zero, which also covers rank-deficient and exactly zero
/// covariances. Either way one standard-normal variate is consumed per
/// dimension per sample, so the draw count is independent of which route the
/// factorization took.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if cov.ncols() != n {
            return Err(Error::Dimension {
                context: "GaussianSampler",
                expected: "square covariance".to_string(),
                got: format!("{}x{}", cov.nrows(), cov.ncols()),
            });
        }
        let sym = symmetrized(cov);
        let factor = match Cholesky::new(sym.clone()) {
            Some(chol) => chol.l(),
            None => {
                let eig = sym.symmetric_eigen();
                let mut scaled = eig.eigenvectors.clone();
                for (i, lambda) in eig.eigenvalues.iter().enumerate() {
                    let root = lambda.max(0.0).sqrt();
                    scaled.column_mut(i).scale_mut(root);
                }
                scaled
            }
        };
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.factor * z
    }
}

/// Substream channels of one run's RNG.
const CHANNELS: u64 = 4;
const CHANNEL_PROCESS: u64 = 0;
const CHANNEL_MEASUREMENT: u64 = 1;
const CHANNEL_DEFENDER: u64 = 2;
const CHANNEL_INIT: u64 = 3;

/// The per-run RNG split into its fixed substreams.
pub struct RunStreams {
    /// Process noise w_k.
    pub process: ChaCha12Rng,
    /// Adversary measurement noise v_k.
    pub measurement: ChaCha12Rng,
    /// Defender observation noise eps_k.
    pub defender: ChaCha12Rng,
    /// Random initial conditions (true state and forward estimate).
    pub init: ChaCha12Rng,
}

impl RunStreams {
    /// Streams for run `run` of an experiment with master seed `seed`.
    pub fn new(seed: u64, run: u64) -> Self {
        let make = |channel: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(run.wrapping_mul(CHANNELS).wrapping_add(channel));
            rng
        };
        Self {
            process: make(CHANNEL_PROCESS),
            measurement: make(CHANNEL_MEASUREMENT),
            defender: make(CHANNEL_DEFENDER),
            init: make(CHANNEL_INIT),
        }
    }
}

/// A simulated ground-truth trajectory with the adversary's measurements and
/// the realized noise.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States x_0 .. x_K (length K + 1).
    pub states: Vec<DVector<f64>>,
    /// Measurements y_1 .. y_K (length K); `observations[k]` is y_{k+1}.
    pub observations: Vec<DVector<f64>>,
    /// Realized process noise w_0 .. w_{K-1}.
    pub process_noise: Vec<DVector<f64>>,
    /// Realized measurement noise v_1 .. v_K.
    pub measurement_noise: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Number of simulated steps K.
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }
}

/// Simulate `horizon` steps from `x0` using explicit process/measurement
/// streams. Non-finite states (e.g. from dynamics blowing up) abort with the
/// offending step.
pub fn simulate_trajectory_with(
    model: &StateSpaceModel,
    x0: &DVector<f64>,
    horizon: usize,
    process_rng: &mut ChaCha12Rng,
    measurement_rng: &mut ChaCha12Rng,
) -> Result<Trajectory> {
    let dims = model.dims();
    if x0.len() != dims.n_x {
        return Err(Error::Dimension {
            context: "simulate_trajectory",
            expected: format!("{}", dims.n_x),
            got: format!("{}", x0.len()),
        });
    }
    let process = GaussianSampler::new(model.q())?;
    let measurement = GaussianSampler::new(model.r())?;

    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon);
    let mut process_noise = Vec::with_capacity(horizon);
    let mut measurement_noise = Vec::with_capacity(horizon);
    states.push(x0.clone());

    for k in 0..horizon {
        let w = process.sample(process_rng);
        let next = model.f(&states[k]) + &w;
        if !vector_is_finite(&next) {
            return Err(Error::NonFinite {
                context: "simulated state",
                step: k + 1,
            });
        }
        let v = measurement.sample(measurement_rng);
        let y = model.h(&next) + &v;
        if !vector_is_finite(&y) {
            return Err(Error::NonFinite {
                context: "simulated measurement",
                step: k + 1,
            });
        }
        states.push(next);
        observations.push(y);
        process_noise.push(w);
        measurement_noise.push(v);
    }

    Ok(Trajectory {
        states,
        observations,
        process_noise,
        measurement_noise,
    })
}

/// Simulate a trajectory from a bare seed (run 0's process/measurement
/// substreams).
pub fn simulate_trajectory(
    model: &StateSpaceModel,
    x0: &DVector<f64>,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut streams = RunStreams::new(seed, 0);
    simulate_trajectory_with(
        model,
        x0,
        horizon,
        &mut streams.process,
        &mut streams.measurement,
    )
}

/// One noisy defender observation a = g(xhat) + eps using an explicit stream.
pub fn defender_observation_with(
    model: &StateSpaceModel,
    xhat: &DVector<f64>,
    sampler: &GaussianSampler,
    rng: &mut ChaCha12Rng,
) -> DVector<f64> {
    model.g(xhat) + sampler.sample(rng)
}

/// One noisy defender observation from a bare seed (run 0's defender
/// substream).
pub fn simulate_defender_observation(
    model: &StateSpaceModel,
    xhat: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut streams = RunStreams::new(seed, 0);
    let sampler = GaussianSampler::new(model.sigma_eps())?;
    Ok(defender_observation_with(
        model,
        xhat,
        &sampler,
        &mut streams.defender,
    ))
}
