//! Monte Carlo experiment driver.
//!
//! One experiment is a batch of independent runs over a single scenario. Every
//! run draws its own initial conditions and noise from counter-based streams
//! keyed by `(seed, run)`, so results are identical no matter how runs are
//! scheduled across threads, and every filter variant inside a run sees the
//! same trajectory and the same defender noise (paired comparisons).
//!
//! Per run the driver produces one row per curve:
//!
//! * `err_forward_ukf`, `err_forward_ekf` — per-step squared estimation error
//!   of the forward filters, summed over the scenario's error components;
//! * `err_inverse_<variant>` — the same for each configured inverse variant,
//!   measured against the forward filter that actually produced the actions;
//! * `rcrlb_forward_*`, `rcrlb_inverse_*` — per-step lower-bound variances
//!   from the information recursion, linearized along that run's estimates.
//!
//! Error and bound rows are stored pre-root (squared error / variance);
//! root-mean-square transforms happen at reporting time.

use anyhow::Context;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use iukf::forward::{run_forward_filter, FilterState, ForwardFilterKind, ForwardStepTrace};
use iukf::inverse::evaluate_ftilde;
use iukf::inverse::{
    run_inverse_filter, InverseFilterKind, InverseInit, InverseOptions, InverseRun, SigmaStarAnchor,
};
use iukf::jacobian::{central_jacobian, try_central_jacobian, BOUND_FD_STEP};
use iukf::model::StateSpaceModel;
use iukf::rcrlb::{
    forward_rcrlb_step, initial_information, inverse_rcrlb_step, rcrlb_variance,
    regularize_covariance, DEFAULT_REGULARIZATION_SCALE,
};
use iukf::scenarios::ScenarioConfig;
use iukf::sim::{simulate_trajectory_with, GaussianSampler, RunStreams, Trajectory};

/// One configured inverse-filter variant.
///
/// The variant's curve label encodes the combination: the defender machinery
/// (`iukf` / `iekf`) and which *true* forward filter generated the actions it
/// watches (`_1` = the kind the machinery replicates, `_2` = the other kind).
#[derive(Debug, Clone)]
pub struct VariantSpec {
    /// Short name, e.g. `iukf_1`; becomes part of the curve labels.
    pub name: String,
    /// Defender machinery.
    pub inverse: InverseFilterKind,
    /// The forward filter that actually produced the estimates and actions
    /// this variant watches.
    pub true_forward: ForwardFilterKind,
    /// The forward spread parameter assumed inside the inverse filter
    /// (unscented machinery only).
    pub assumed_kappa: f64,
}

impl VariantSpec {
    /// Curve label of this variant's squared-error rows.
    pub fn error_curve(&self) -> String {
        format!("err_inverse_{}", self.name)
    }

    /// True when the watched forward filter is the kind the machinery
    /// replicates; only then is the inverse bound recursion well defined.
    pub fn is_matched(&self) -> bool {
        self.true_forward == self.inverse.compatible_forward()
    }

    /// Curve label of this variant's bound rows, for matched variants.
    pub fn bound_curve(&self) -> Option<String> {
        self.is_matched()
            .then(|| format!("rcrlb_inverse_{}", self.name))
    }
}

/// Everything needed to execute one experiment.
pub struct ExperimentPlan {
    pub model: StateSpaceModel,
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub anchor: SigmaStarAnchor,
    pub variants: Vec<VariantSpec>,
}

impl ExperimentPlan {
    /// Curve labels in the fixed order runs report them.
    pub fn curve_names(&self) -> Vec<String> {
        let mut names = vec!["err_forward_ukf".to_string(), "err_forward_ekf".to_string()];
        names.extend(self.variants.iter().map(VariantSpec::error_curve));
        names.push("rcrlb_forward_ukf".to_string());
        names.push("rcrlb_forward_ekf".to_string());
        names.extend(self.variants.iter().filter_map(VariantSpec::bound_curve));
        names
    }
}

/// All rows of one curve across the completed runs of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub name: String,
    /// `(run index, per-step values)`, ordered by run index. Values are
    /// squared errors for `err_*` curves and bound variances for `rcrlb_*`
    /// curves; row position `k` corresponds to time step `k + 1`.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl CurveSeries {
    /// Number of time steps per row.
    pub fn horizon(&self) -> usize {
        self.rows.first().map_or(0, |(_, v)| v.len())
    }

    /// Monte Carlo mean at each step.
    pub fn mean_per_step(&self) -> Vec<f64> {
        let n = self.rows.len();
        let mut mean = vec![0.0; self.horizon()];
        for (_, row) in &self.rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        mean
    }

    /// Standard error of the per-step mean.
    pub fn se_per_step(&self) -> Vec<f64> {
        let n = self.rows.len();
        let mean = self.mean_per_step();
        let mut var = vec![0.0; self.horizon()];
        for (_, row) in &self.rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        var.iter()
            .map(|s| (s / (n.max(2) - 1) as f64 / n as f64).sqrt())
            .collect()
    }

    /// Mean over all runs and steps.
    pub fn grand_mean(&self) -> f64 {
        let total: f64 = self
            .rows
            .iter()
            .map(|(_, row)| row.iter().sum::<f64>())
            .sum();
        total / (self.rows.len() * self.horizon()) as f64
    }

    /// Root of [`Self::grand_mean`]: the curve's single-number summary.
    pub fn rms(&self) -> f64 {
        self.grand_mean().sqrt()
    }

    /// Per-run mean over steps, keyed by run index; the resampling unit for
    /// paired comparisons between curves of the same experiment.
    pub fn per_run_mean(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .map(|(run, row)| (*run, row.iter().sum::<f64>() / row.len() as f64))
            .collect()
    }

    /// Plot transform: root of the running average of the per-step mean up to
    /// each step. Smooths single-step noise while preserving ordering trends.
    pub fn cumulative_rms(&self) -> Vec<f64> {
        let mean = self.mean_per_step();
        let mut acc = 0.0;
        mean.iter()
            .enumerate()
            .map(|(k, m)| {
                acc += m;
                (acc / (k + 1) as f64).sqrt()
            })
            .collect()
    }
}

/// The outcome of an experiment: per-curve rows for every completed run,
/// plus an account of runs that aborted (non-finite states, factorization
/// failures). Failed runs contribute to no curve.
#[derive(Debug, Clone)]
pub struct ExperimentRecords {
    pub scenario: String,
    pub horizon: usize,
    pub requested_runs: usize,
    pub curves: Vec<CurveSeries>,
    /// `(run index, error description)` for each aborted run.
    pub failed_runs: Vec<(usize, String)>,
}

impl ExperimentRecords {
    pub fn completed_runs(&self) -> usize {
        self.requested_runs - self.failed_runs.len()
    }

    pub fn curve(&self, name: &str) -> Option<&CurveSeries> {
        self.curves.iter().find(|c| c.name == name)
    }

    /// `(error curve, bound curve)` pairs present in this experiment.
    pub fn bound_pairs(&self) -> Vec<(&CurveSeries, &CurveSeries)> {
        self.curves
            .iter()
            .filter_map(|bound| {
                let err_name = bound.name.strip_prefix("rcrlb_")?;
                let err = self.curve(&format!("err_{err_name}"))?;
                Some((err, bound))
            })
            .collect()
    }
}

/// Run the experiment, honoring the `IUKF_WORKERS` environment variable
/// (worker thread count; unset means the default pool).
pub fn run_experiment(plan: &ExperimentPlan) -> anyhow::Result<ExperimentRecords> {
    let workers = std::env::var("IUKF_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    run_experiment_with_workers(plan, workers)
}

/// Run the experiment on an explicit worker count (`None` = default pool).
/// Results are independent of the worker count.
pub fn run_experiment_with_workers(
    plan: &ExperimentPlan,
    workers: Option<usize>,
) -> anyhow::Result<ExperimentRecords> {
    let compute = || {
        (0..plan.scenario.runs)
            .into_par_iter()
            .map(|run| simulate_one_run(plan, run))
            .collect::<Vec<_>>()
    };
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building worker pool")?
            .install(compute),
        None => compute(),
    };

    let names = plan.curve_names();
    let mut curves: Vec<CurveSeries> = names
        .iter()
        .map(|n| CurveSeries {
            name: n.clone(),
            rows: Vec::new(),
        })
        .collect();
    let mut failed_runs = Vec::new();
    for (run, result) in results.into_iter().enumerate() {
        match result {
            Ok(columns) => {
                debug_assert_eq!(columns.len(), curves.len());
                for (curve, column) in curves.iter_mut().zip(columns) {
                    curve.rows.push((run, column));
                }
            }
            Err(err) => failed_runs.push((run, err.to_string())),
        }
    }
    if failed_runs.len() == plan.scenario.runs {
        anyhow::bail!(
            "all {} runs failed; first error: {}",
            plan.scenario.runs,
            failed_runs[0].1
        );
    }
    Ok(ExperimentRecords {
        scenario: plan.scenario.name.clone(),
        horizon: plan.scenario.horizon,
        requested_runs: plan.scenario.runs,
        curves,
        failed_runs,
    })
}

/// Execute run `run` and return one column of per-step values per curve, in
/// [`ExperimentPlan::curve_names`] order. Any filter or bound failure aborts
/// the whole run.
fn simulate_one_run(plan: &ExperimentPlan, run: usize) -> iukf::Result<Vec<Vec<f64>>> {
    let model = &plan.model;
    let init = &plan.scenario.init;
    let horizon = plan.scenario.horizon;
    let indices = &plan.scenario.error_indices;

    // Fixed draw order on the init stream: truth, forward estimate, inverse
    // estimate. Changing this order changes every seeded result.
    let mut streams = RunStreams::new(plan.seed, run as u64);
    let x0 = init.x0.sample(None, &mut streams.init)?;
    let xhat0 = init.xhat0.sample(Some(&x0), &mut streams.init)?;
    let xhathat0 = init.xhathat0.sample(Some(&x0), &mut streams.init)?;

    let traj = simulate_trajectory_with(
        model,
        &x0,
        horizon,
        &mut streams.process,
        &mut streams.measurement,
    )?;

    let fwd_ukf = run_forward_filter(
        model,
        ForwardFilterKind::Ukf,
        &xhat0,
        &init.sigma0,
        init.kappa,
        &traj,
    )?;
    let fwd_ekf = run_forward_filter(
        model,
        ForwardFilterKind::Ekf,
        &xhat0,
        &init.sigma0,
        init.kappa,
        &traj,
    )?;

    // One defender-noise sequence per run, shared by every inverse variant so
    // that variant comparisons differ only in the filters, not the noise.
    let eps_sampler = GaussianSampler::new(model.sigma_eps())?;
    let eps: Vec<DVector<f64>> = (0..horizon)
        .map(|_| eps_sampler.sample(&mut streams.defender))
        .collect();

    let states_of = |steps: &[(FilterState, ForwardStepTrace)]| -> Vec<FilterState> {
        steps.iter().map(|(s, _)| s.clone()).collect()
    };
    let ukf_states = states_of(&fwd_ukf);
    let ekf_states = states_of(&fwd_ekf);
    let actions_of = |states: &[FilterState]| -> Vec<DVector<f64>> {
        states
            .iter()
            .zip(&eps)
            .map(|(s, e)| model.g(&s.xhat) + e)
            .collect()
    };
    let ukf_actions = actions_of(&ukf_states);
    let ekf_actions = actions_of(&ekf_states);

    let squared = |err: &DVector<f64>| -> f64 { indices.iter().map(|&i| err[i] * err[i]).sum() };
    let forward_errors = |states: &[FilterState]| -> Vec<f64> {
        states
            .iter()
            .enumerate()
            .map(|(k, s)| squared(&(&s.xhat - &traj.states[k + 1])))
            .collect()
    };

    let inv_init = InverseInit {
        xhathat0: xhathat0.clone(),
        sigma_bar0: init.sigma_bar0.clone(),
        sigma_star0: init.sigma0.clone(),
    };

    let mut inverse_error_curves = Vec::with_capacity(plan.variants.len());
    let mut inverse_bound_curves = Vec::new();
    for variant in &plan.variants {
        let (truth_states, truth_actions) = match variant.true_forward {
            ForwardFilterKind::Ukf => (&ukf_states, &ukf_actions),
            ForwardFilterKind::Ekf => (&ekf_states, &ekf_actions),
        };
        let options = InverseOptions {
            assumed_kappa_fwd: variant.assumed_kappa,
            kappa_inv: init.kappa_inv,
            anchor: plan.anchor,
        };
        let inv = run_inverse_filter(
            model,
            variant.inverse,
            variant.inverse.compatible_forward(),
            &options,
            &inv_init,
            &traj,
            truth_states,
            truth_actions,
        )?;
        inverse_error_curves.push(inv.errors.iter().map(&squared).collect::<Vec<f64>>());
        if variant.is_matched() {
            inverse_bound_curves.push(inverse_bound(
                model, &inv_init, &inv, &traj, variant, indices,
            )?);
        }
    }

    let q_reg = regularize_covariance(model.q(), DEFAULT_REGULARIZATION_SCALE).0;
    let bound_ukf = forward_bound(model, &init.sigma0, &xhat0, &ukf_states, &q_reg, indices)?;
    let bound_ekf = forward_bound(model, &init.sigma0, &xhat0, &ekf_states, &q_reg, indices)?;

    let mut columns = vec![forward_errors(&ukf_states), forward_errors(&ekf_states)];
    columns.extend(inverse_error_curves);
    columns.push(bound_ukf);
    columns.push(bound_ekf);
    columns.extend(inverse_bound_curves);
    Ok(columns)
}

/// Forward lower-bound recursion along one run, linearized at the filter's
/// own posterior estimates: the transition Jacobian at the estimate entering
/// the step, the measurement Jacobian at the estimate it produces.
fn forward_bound(
    model: &StateSpaceModel,
    sigma0: &DMatrix<f64>,
    xhat0: &DVector<f64>,
    states: &[FilterState],
    q_reg: &DMatrix<f64>,
    indices: &[usize],
) -> iukf::Result<Vec<f64>> {
    let mut info = initial_information(sigma0)?;
    let mut prev = xhat0.clone();
    let mut out = Vec::with_capacity(states.len());
    for state in states {
        let f_jac = model.jacobian_f(&prev);
        let h_jac = model.jacobian_h(&state.xhat);
        info = forward_rcrlb_step(&info, &f_jac, &h_jac, q_reg, model.r())?;
        out.push(rcrlb_variance(&info, indices)?);
        prev = state.xhat.clone();
    }
    Ok(out)
}

/// Inverse lower-bound recursion along one run.
///
/// The inverse transition map has no closed form, so its Jacobian comes from
/// central differences around the inverse estimate entering each step: for
/// the unscented machinery, differences of the full replayed forward step
/// (holding that step's covariance replica and true next state fixed, with
/// zero measurement noise); for the extended machinery, differences of the
/// prediction map with the step's replicated gain frozen. The effective
/// process noise is the replicated gain's measurement-noise image, ridge-
/// regularized because it is rank-deficient whenever there are fewer
/// measurements than states.
fn inverse_bound(
    model: &StateSpaceModel,
    inv_init: &InverseInit,
    inv: &InverseRun,
    traj: &Trajectory,
    variant: &VariantSpec,
    indices: &[usize],
) -> iukf::Result<Vec<f64>> {
    let n_y = model.dims().n_y;
    let mut info = initial_information(&inv_init.sigma_bar0)?;
    let mut prev = inv_init.xhathat0.clone();
    let mut out = Vec::with_capacity(inv.states.len());
    for (k, (state, trace)) in inv.states.iter().zip(&inv.traces).enumerate() {
        let x_next = &traj.states[k + 1];
        let ftilde_jac = match variant.inverse {
            InverseFilterKind::Iukf => {
                let sigma_star = &trace.sigma_star_prev;
                let zero_v = DVector::zeros(n_y);
                try_central_jacobian(
                    |x| {
                        evaluate_ftilde(
                            model,
                            x,
                            sigma_star,
                            x_next,
                            &zero_v,
                            variant.assumed_kappa,
                        )
                    },
                    &prev,
                    BOUND_FD_STEP,
                )?
            }
            InverseFilterKind::Iekf => {
                let gain = &trace.forward_gain;
                central_jacobian(
                    |x| {
                        let pred = model.f(x);
                        let mut innovation = model.h(x_next) - model.h(&pred);
                        model.wrap_innovation(&mut innovation);
                        pred + gain * innovation
                    },
                    &prev,
                    BOUND_FD_STEP,
                )
            }
        };
        let gain = &trace.forward_gain;
        let qbar = gain * model.r() * gain.transpose();
        let qbar_reg = regularize_covariance(&qbar, DEFAULT_REGULARIZATION_SCALE).0;
        let g_jac = model.jacobian_g(&state.xhathat);
        info = inverse_rcrlb_step(&info, &ftilde_jac, &g_jac, &qbar_reg, model.sigma_eps())?;
        out.push(rcrlb_variance(&info, indices)?);
        prev = state.xhathat.clone();
    }
    Ok(out)
}
