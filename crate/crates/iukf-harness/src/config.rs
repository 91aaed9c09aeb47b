//! TOML experiment configuration.
//!
//! A configuration names a scenario and optionally overrides its sizes,
//! spread parameters, variant list, and scenario-specific constants. Unknown
//! keys are rejected so that typos fail loudly instead of silently running
//! the defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use iukf::forward::ForwardFilterKind;
use iukf::inverse::{InverseFilterKind, SigmaStarAnchor};
use iukf::scenarios::fm::{fm_demodulator_model_with, FmOptions};
use iukf::scenarios::linear::default_linear_toy;
use iukf::scenarios::reentry::{reentry_model, ReentryConstants};
use iukf::scenarios::{ScenarioConfig, ScenarioInit};

use crate::experiment::{ExperimentPlan, VariantSpec};

/// Partial override of the reentry tracking constants; unset fields keep
/// their defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReentryOverrides {
    /// Discretization interval (s).
    pub dt: Option<f64>,
    /// Runge-Kutta substeps per interval.
    pub substeps: Option<usize>,
    /// Range noise standard deviation (km).
    pub range_sigma: Option<f64>,
    /// Bearing noise standard deviation (rad).
    pub bearing_sigma: Option<f64>,
}

impl ReentryOverrides {
    fn apply(&self, mut constants: ReentryConstants) -> ReentryConstants {
        if let Some(dt) = self.dt {
            constants.dt = dt;
        }
        if let Some(substeps) = self.substeps {
            constants.substeps = substeps;
        }
        if let Some(sigma) = self.range_sigma {
            constants.range_sigma = sigma;
        }
        if let Some(sigma) = self.bearing_sigma {
            constants.bearing_sigma = sigma;
        }
        constants
    }
}

/// A parsed experiment configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario name: `fm`, `reentry`, or `linear`.
    pub scenario: String,
    /// Base seed; run `r` derives its streams from `(seed, r)`.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Monte Carlo run count override.
    pub runs: Option<usize>,
    /// Steps-per-run override.
    pub horizon: Option<usize>,
    /// Where `run` writes its output files.
    pub output_dir: Option<PathBuf>,
    /// Inverse variants to execute; defaults depend on the scenario. Valid
    /// names: `iukf_1`, `iukf_2`, `iekf_1`, `iekf_2`, `iukf_1_matched`.
    pub variants: Option<Vec<String>>,
    /// True forward spread parameter override.
    pub kappa: Option<f64>,
    /// Augmented (inverse) spread parameter override.
    pub kappa_inv: Option<f64>,
    /// Override of the forward spread the defender assumes.
    pub assumed_kappa: Option<f64>,
    /// Covariance-replica anchoring: `previous` (default) or `updated`.
    pub sigma_star_anchor: Option<String>,
    /// Frequency-demodulation scenario: use the literal coupling-entry form
    /// of the transition matrix instead of the discretized one.
    pub fm_literal_transition: Option<bool>,
    /// Reentry constant overrides.
    pub reentry: Option<ReentryOverrides>,
}

fn default_seed() -> u64 {
    42
}

impl ExperimentConfig {
    /// A configuration for `scenario` with every override unset.
    pub fn for_scenario(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed: default_seed(),
            runs: None,
            horizon: None,
            output_dir: None,
            variants: None,
            kappa: None,
            kappa_inv: None,
            assumed_kappa: None,
            sigma_star_anchor: None,
            fm_literal_transition: None,
            reentry: None,
        }
    }
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading configuration {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing configuration {}", path.display()))
}

fn default_variant_names(scenario: &str) -> Vec<&'static str> {
    match scenario {
        "fm" => vec!["iukf_1", "iukf_2", "iekf_1", "iekf_2", "iukf_1_matched"],
        "reentry" => vec!["iukf_1", "iukf_2"],
        _ => vec!["iukf_1", "iekf_1"],
    }
}

fn variant_spec(name: &str, init: &ScenarioInit) -> anyhow::Result<VariantSpec> {
    let (inverse, true_forward, assumed_kappa) = match name {
        "iukf_1" => (
            InverseFilterKind::Iukf,
            ForwardFilterKind::Ukf,
            init.assumed_kappa,
        ),
        "iukf_2" => (
            InverseFilterKind::Iukf,
            ForwardFilterKind::Ekf,
            init.assumed_kappa,
        ),
        "iekf_1" => (InverseFilterKind::Iekf, ForwardFilterKind::Ekf, init.kappa),
        "iekf_2" => (InverseFilterKind::Iekf, ForwardFilterKind::Ukf, init.kappa),
        // Control variant: unscented machinery with the assumed spread pinned
        // to the true one, isolating the effect of an assumed-spread mismatch.
        "iukf_1_matched" => (InverseFilterKind::Iukf, ForwardFilterKind::Ukf, init.kappa),
        other => bail!(
            "unknown variant {other:?}; valid names are \
             iukf_1, iukf_2, iekf_1, iekf_2, iukf_1_matched"
        ),
    };
    Ok(VariantSpec {
        name: name.to_string(),
        inverse,
        true_forward,
        assumed_kappa,
    })
}

fn parse_anchor(name: &str) -> anyhow::Result<SigmaStarAnchor> {
    match name {
        "previous" => Ok(SigmaStarAnchor::PreviousEstimate),
        "updated" => Ok(SigmaStarAnchor::UpdatedEstimate),
        other => bail!("unknown sigma_star_anchor {other:?}; use `previous` or `updated`"),
    }
}

/// Resolve a configuration into an executable plan: build the scenario,
/// apply overrides, and validate the result.
pub fn build_plan(config: &ExperimentConfig) -> anyhow::Result<ExperimentPlan> {
    let (model, mut scenario): (_, ScenarioConfig) = match config.scenario.as_str() {
        "fm" => {
            let options = FmOptions {
                literal_transition_entry: config.fm_literal_transition.unwrap_or(false),
            };
            fm_demodulator_model_with(&options)
        }
        "reentry" => {
            let constants = config
                .reentry
                .clone()
                .unwrap_or_default()
                .apply(ReentryConstants::default());
            reentry_model(&constants)
        }
        "linear" => default_linear_toy().context("building linear scenario")?,
        other => bail!("unknown scenario {other:?}; use `fm`, `reentry`, or `linear`"),
    };
    if config.fm_literal_transition.is_some() && config.scenario != "fm" {
        bail!("fm_literal_transition only applies to the fm scenario");
    }
    if config.reentry.is_some() && config.scenario != "reentry" {
        bail!("[reentry] overrides only apply to the reentry scenario");
    }

    if let Some(runs) = config.runs {
        scenario.runs = runs;
    }
    if let Some(horizon) = config.horizon {
        scenario.horizon = horizon;
    }
    if scenario.runs == 0 || scenario.horizon == 0 {
        bail!("runs and horizon must both be positive");
    }
    if let Some(kappa) = config.kappa {
        scenario.init.kappa = kappa;
    }
    if let Some(kappa_inv) = config.kappa_inv {
        scenario.init.kappa_inv = kappa_inv;
    }
    if let Some(assumed) = config.assumed_kappa {
        scenario.init.assumed_kappa = assumed;
    }
    scenario
        .validate(&model)
        .context("validating scenario configuration")?;

    let anchor = match &config.sigma_star_anchor {
        Some(name) => parse_anchor(name)?,
        None => SigmaStarAnchor::PreviousEstimate,
    };
    let names: Vec<String> = match &config.variants {
        Some(list) => list.clone(),
        None => default_variant_names(&config.scenario)
            .into_iter()
            .map(str::to_string)
            .collect(),
    };
    let mut variants = Vec::with_capacity(names.len());
    for name in &names {
        if variants.iter().any(|v: &VariantSpec| &v.name == name) {
            bail!("variant {name:?} listed twice");
        }
        variants.push(variant_spec(name, &scenario.init)?);
    }
    if variants.is_empty() {
        bail!("at least one inverse variant is required");
    }

    Ok(ExperimentPlan {
        model,
        scenario,
        seed: config.seed,
        anchor,
        variants,
    })
}
