//! Command-line driver for the Monte Carlo experiments.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};

use iukf_harness::config::{build_plan, load_config};
use iukf_harness::diagnostics::{fit_boundedness_envelope, DEFAULT_VIOLATION_TOLERANCE};
use iukf_harness::experiment::{run_experiment, ExperimentRecords};
use iukf_harness::output;

#[derive(Parser)]
#[command(
    name = "iukf-harness",
    about = "Monte Carlo experiments for forward and inverse Kalman-type filters",
    long_about = "Runs batches of paired simulations in which forward filters track a \
                  simulated trajectory while inverse filters infer the forward filters' \
                  estimates from their observed actions, and evaluates estimation-error \
                  lower bounds alongside. The IUKF_WORKERS environment variable caps the \
                  worker thread count; results do not depend on it."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write records, summary, and plot files.
    Run {
        /// Experiment configuration (TOML).
        config: PathBuf,
        /// Output directory (overrides the configuration's `output_dir`).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run an experiment and print each curve's root-mean-square error.
    Compare {
        /// Experiment configuration (TOML).
        config: PathBuf,
    },
    /// Run an experiment and print Monte Carlo error against its lower bound.
    Rcrlb {
        /// Experiment configuration (TOML).
        config: PathBuf,
        /// Number of evenly spaced time checkpoints to print.
        #[arg(long, default_value_t = 10)]
        checkpoints: usize,
    },
    /// Fit exponential-boundedness envelopes to recorded error curves.
    Diagnose {
        /// A records.csv written by `run`.
        records: PathBuf,
        /// Restrict to one curve (default: every err_ curve in the file).
        #[arg(long)]
        curve: Option<String>,
    },
}

fn execute(config_path: &Path) -> anyhow::Result<(ExperimentRecords, Option<PathBuf>)> {
    let config = load_config(config_path)?;
    let plan = build_plan(&config)?;
    eprintln!(
        "scenario {} | {} runs x {} steps | seed {} | variants: {}",
        plan.scenario.name,
        plan.scenario.runs,
        plan.scenario.horizon,
        plan.seed,
        plan.variants
            .iter()
            .map(|v| v.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    let records = run_experiment(&plan)?;
    if !records.failed_runs.is_empty() {
        eprintln!(
            "warning: {} of {} runs aborted and are excluded; first: run {}: {}",
            records.failed_runs.len(),
            records.requested_runs,
            records.failed_runs[0].0,
            records.failed_runs[0].1
        );
    }
    Ok((records, config.output_dir))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, output_dir } => {
            let (records, configured_dir) = execute(&config)?;
            let dir = output_dir
                .or(configured_dir)
                .unwrap_or_else(|| PathBuf::from("out").join(&records.scenario));
            output::write_all(&dir, &records)?;
            for (key, value) in output::summary_rows(&records) {
                println!("{key} = {value}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Compare { config } => {
            let (records, _) = execute(&config)?;
            println!("{:<28} {:>14}", "curve", "rms");
            for curve in &records.curves {
                println!("{:<28} {:>14.6e}", curve.name, curve.rms());
            }
        }
        Command::Rcrlb {
            config,
            checkpoints,
        } => {
            let (records, _) = execute(&config)?;
            let pairs = records.bound_pairs();
            if pairs.is_empty() {
                anyhow::bail!("no bound curves in this experiment");
            }
            let step = (records.horizon / checkpoints.max(1)).max(1);
            for (err, bound) in pairs {
                println!("{} vs {}", err.name, bound.name);
                println!("{:>6} {:>14} {:>14}", "k", "mse", "bound");
                let mse = err.mean_per_step();
                let var = bound.mean_per_step();
                for k in (step - 1..records.horizon).step_by(step) {
                    println!("{:>6} {:>14.6e} {:>14.6e}", k + 1, mse[k], var[k]);
                }
            }
        }
        Command::Diagnose { records, curve } => {
            let curves = output::read_records_csv(&records)?;
            let selected: Vec<_> = match &curve {
                Some(name) => {
                    let found = curves
                        .iter()
                        .find(|c| &c.name == name)
                        .with_context(|| format!("curve {name:?} not in {}", records.display()))?;
                    vec![found]
                }
                None => curves
                    .iter()
                    .filter(|c| c.name.starts_with("err_"))
                    .collect(),
            };
            if selected.is_empty() {
                anyhow::bail!("no error curves in {}", records.display());
            }
            for curve in selected {
                let mean = curve.mean_per_step();
                let fit = fit_boundedness_envelope(&mean)
                    .with_context(|| format!("curve {} is empty", curve.name))?;
                let verdict = if !fit.is_bounded(DEFAULT_VIOLATION_TOLERANCE) {
                    "NOT bounded"
                } else if fit.floor_dominates() {
                    "bounded (floor-dominated: the envelope is a ceiling over the data, not a decay)"
                } else {
                    "bounded"
                };
                println!(
                    "{}: {} (decay {:.2}, amplitude {:.1}, floor {:.3e}, violations {:.1}%)",
                    curve.name,
                    verdict,
                    fit.lambda,
                    fit.eta,
                    fit.nu,
                    100.0 * fit.violation_fraction
                );
            }
        }
    }
    Ok(())
}
