//! CSV output. Floats are written with 17 significant digits so a value
//! read back is bit-identical; absent values are empty fields.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use hetfl_core::sim::ExperimentResult;
use hetfl_core::verify::CheckResult;

use crate::experiments::{RunRow, SummaryRow};
use crate::Error;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<File, Error> {
    Ok(File::create(dir.join(name))?)
}

pub fn write_mec_ledger<W: Write>(out: W, r: &ExperimentResult) -> Result<(), Error> {
    let rows = r.ledger.mec_rows.iter().map(|m| {
        vec![
            m.frame.to_string(),
            m.mec.to_string(),
            fmt_f64(m.e_wet),
            fmt_f64(m.e_bh),
            fmt_f64(m.e_mec),
            fmt_f64(m.alpha),
        ]
    });
    write_rows(out, &["frame", "mec_id", "E_wet", "E_bh", "E_mec", "alpha"], rows)
}

pub fn write_device_ledger<W: Write>(out: W, r: &ExperimentResult) -> Result<(), Error> {
    let rows = r.ledger.device_rows.iter().map(|d| {
        vec![
            d.frame.to_string(),
            d.device.to_string(),
            fmt_f64(d.e_cmp),
            fmt_f64(d.e_ac),
            fmt_f64(d.e_dev),
            fmt_f64(d.harvested),
            fmt_f64(d.battery),
        ]
    });
    write_rows(out, &["frame", "device_id", "E_cmp", "E_ac", "E_dev", "A", "battery"], rows)
}

pub fn write_associations<W: Write>(out: W, r: &ExperimentResult) -> Result<(), Error> {
    let rows = r.associations.iter().map(|a| {
        vec![
            a.frame.to_string(),
            a.device.to_string(),
            a.mec.to_string(),
            u8::from(a.active).to_string(),
            fmt_f64(a.theta),
        ]
    });
    write_rows(out, &["frame", "device_id", "mec_id", "active_flag", "theta"], rows)
}

pub fn write_metrics<W: Write>(out: W, policy: &str, r: &ExperimentResult) -> Result<(), Error> {
    let rows = r.metrics.iter().map(|m| {
        vec![m.round.to_string(), policy.to_string(), fmt_f64(m.theta), fmt_f64(m.accuracy), fmt_f64(m.loss)]
    });
    write_rows(out, &["round", "policy", "theta", "test_accuracy", "test_loss"], rows)
}

pub fn write_trace<W: Write>(out: W, r: &ExperimentResult) -> Result<(), Error> {
    let rows = r.trace.iter().map(|t| {
        vec![
            t.frame.to_string(),
            t.device.to_string(),
            fmt_f64(t.position.x),
            fmt_f64(t.position.y),
            t.state.name().to_string(),
            fmt_f64(t.speed),
        ]
    });
    write_rows(out, &["frame", "device_id", "x", "y", "state", "speed"], rows)
}

pub fn write_runs<W: Write>(out: W, runs: &[RunRow]) -> Result<(), Error> {
    let rows = runs.iter().map(|r| {
        vec![
            r.policy.name().to_string(),
            r.param.clone().unwrap_or_default(),
            r.value.clone().unwrap_or_default(),
            r.seed.to_string(),
            fmt_f64(r.delta),
            fmt_opt(r.accuracy),
            fmt_opt(r.theta_final),
        ]
    });
    write_rows(out, &["policy", "param", "value", "seed", "delta", "accuracy", "theta_final"], rows)
}

pub fn write_summary<W: Write>(out: W, summary: &[SummaryRow]) -> Result<(), Error> {
    let rows = summary.iter().map(|s| {
        vec![
            s.param.clone().unwrap_or_default(),
            s.value.clone().unwrap_or_default(),
            s.policy.name().to_string(),
            s.n_seeds.to_string(),
            fmt_f64(s.mean_delta),
            fmt_f64(s.std_delta),
            fmt_opt(s.mean_acc),
            fmt_opt(s.std_acc),
        ]
    });
    let header = ["param", "value", "policy", "n_seeds", "mean_delta", "std_delta", "mean_acc", "std_acc"];
    write_rows(out, &header, rows)
}

pub fn write_checks<W: Write>(out: W, checks: &[CheckResult]) -> Result<(), Error> {
    let rows = checks.iter().map(|c| {
        vec![
            c.name.to_string(),
            c.passed.to_string(),
            fmt_f64(c.worst),
            fmt_f64(c.tolerance),
            c.detail.clone(),
        ]
    });
    write_rows(out, &["check", "passed", "worst", "tolerance", "detail"], rows)
}

/// Every per-run file of a single experiment into `dir`. The trace is only
/// written when there is one.
pub fn write_experiment(dir: &Path, policy: &str, r: &ExperimentResult) -> Result<(), Error> {
    write_mec_ledger(create(dir, "ledger_mec.csv")?, r)?;
    write_device_ledger(create(dir, "ledger_device.csv")?, r)?;
    write_associations(create(dir, "associations.csv")?, r)?;
    write_metrics(create(dir, "metrics.csv")?, policy, r)?;
    if !r.trace.is_empty() {
        write_trace(create(dir, "trace.csv")?, r)?;
    }
    Ok(())
}

pub fn write_batch(dir: &Path, runs: &[RunRow], summary: &[SummaryRow]) -> Result<(), Error> {
    write_runs(create(dir, "runs.csv")?, runs)?;
    write_summary(create(dir, "summary.csv")?, summary)
}

pub fn write_manifest(dir: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(dir.join("manifest.cfg"), text)?;
    Ok(())
}
