//! Experiment output files.
//!
//! An experiment writes three kinds of files into its output directory:
//!
//! * `records.csv` — the long table `run_id,k,curve,value` with one row per
//!   run, step, and curve. Values are squared errors (`err_*` curves) or
//!   bound variances (`rcrlb_*` curves), printed with 17 significant digits
//!   so parsing them back reproduces the exact doubles.
//! * `summary.csv` — `key,value` pairs: experiment metadata plus the
//!   root-mean-square summary of each curve.
//! * `plot_<curve>.csv` — two columns `k,value` holding the running
//!   root-mean-square of the curve, ready for plotting.

use std::path::Path;

use anyhow::Context;

use crate::experiment::{CurveSeries, ExperimentRecords};

/// Render a value with enough digits to survive a parse round-trip exactly.
pub fn format_value(value: f64) -> String {
    format!("{value:.16e}")
}

/// Write the long-form records table.
pub fn write_records_csv(path: &Path, records: &ExperimentRecords) -> anyhow::Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["run_id", "k", "curve", "value"])?;
    for curve in &records.curves {
        for (run, row) in &curve.rows {
            for (i, value) in row.iter().enumerate() {
                writer.write_record([
                    run.to_string(),
                    (i + 1).to_string(),
                    curve.name.clone(),
                    format_value(*value),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// The `key,value` summary rows, in file order.
pub fn summary_rows(records: &ExperimentRecords) -> Vec<(String, String)> {
    let mut rows = vec![
        ("scenario".to_string(), records.scenario.clone()),
        ("horizon".to_string(), records.horizon.to_string()),
        (
            "requested_runs".to_string(),
            records.requested_runs.to_string(),
        ),
        (
            "completed_runs".to_string(),
            records.completed_runs().to_string(),
        ),
        (
            "failed_runs".to_string(),
            records.failed_runs.len().to_string(),
        ),
    ];
    for curve in &records.curves {
        rows.push((format!("rms_{}", curve.name), format_value(curve.rms())));
    }
    rows
}

/// Write the summary table.
pub fn write_summary_csv(path: &Path, records: &ExperimentRecords) -> anyhow::Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["key", "value"])?;
    for (key, value) in summary_rows(records) {
        writer.write_record([key, value])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write one running-root-mean-square plot file per curve.
pub fn write_plot_files(dir: &Path, records: &ExperimentRecords) -> anyhow::Result<()> {
    for curve in &records.curves {
        let path = dir.join(format!("plot_{}.csv", curve.name));
        let mut writer = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        writer.write_record(["k", "value"])?;
        for (i, value) in curve.cumulative_rms().iter().enumerate() {
            writer.write_record([(i + 1).to_string(), format_value(*value)])?;
        }
        writer.flush()?;
    }
    Ok(())
}

/// Write records, summary, and plot files into `dir`, creating it if needed.
pub fn write_all(dir: &Path, records: &ExperimentRecords) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_records_csv(&dir.join("records.csv"), records)?;
    write_summary_csv(&dir.join("summary.csv"), records)?;
    write_plot_files(dir, records)?;
    Ok(())
}

/// Read a records table back into per-curve series (curves in first-seen
/// order, rows ordered by run index as written).
pub fn read_records_csv(path: &Path) -> anyhow::Result<Vec<CurveSeries>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["run_id", "k", "curve", "value"] {
        anyhow::bail!("unexpected records header {headers:?}");
    }
    let mut curves: Vec<CurveSeries> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let run: usize = record[0].parse().context("parsing run_id")?;
        let k: usize = record[1].parse().context("parsing k")?;
        let name = &record[2];
        let value: f64 = record[3].parse().context("parsing value")?;
        let curve = match curves.iter_mut().find(|c| c.name == name) {
            Some(c) => c,
            None => {
                curves.push(CurveSeries {
                    name: name.to_string(),
                    rows: Vec::new(),
                });
                curves.last_mut().unwrap()
            }
        };
        if curve.rows.last().map(|(r, _)| *r) != Some(run) {
            curve.rows.push((run, Vec::new()));
        }
        let row = &mut curve.rows.last_mut().unwrap().1;
        if row.len() + 1 != k {
            anyhow::bail!(
                "curve {name} run {run}: step {k} out of order (have {} steps)",
                row.len()
            );
        }
        row.push(value);
    }
    Ok(curves)
}

/// Read a summary table back as `key -> value` pairs.
pub fn read_summary_csv(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}
