//! CSV outputs. Floats use Rust's shortest round-trip `{:e}` form, so files
//! written from identical states are byte-identical. See
//! `docs/csv_formats.md`.

use std::fs::{File, OpenOptions};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};

use semflow_core::diagnostics::{ForceRecord, RunningStats};
use semflow_core::StepReport;

pub const DIAGNOSTICS_HEADER: [&str; 14] = [
    "step",
    "time",
    "order",
    "cfl",
    "pressure_iters",
    "pressure_residual",
    "u_iters",
    "u_residual",
    "v_iters",
    "v_residual",
    "w_iters",
    "w_residual",
    "divergence",
    "projection_size",
];

pub const TIMING_HEADER: [&str; 2] = ["step", "wall_seconds"];

pub const FORCES_HEADER: [&str; 15] = [
    "step",
    "time",
    "tag",
    "fx_pressure",
    "fy_pressure",
    "fz_pressure",
    "fx_viscous",
    "fy_viscous",
    "fz_viscous",
    "cd",
    "cl",
    "cd_mean",
    "cd_std",
    "cl_mean",
    "cl_std",
];

pub fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// A CSV file whose first column is the step number.
pub struct StepCsv {
    w: csv::Writer<BufWriter<File>>,
}

impl StepCsv {
    /// Creates `path` with `header`, or, when `resume_after` is set, keeps
    /// the rows of an existing file up to that step and appends after them.
    /// Returns the writer and the kept rows.
    pub fn open(
        path: &Path,
        header: &[&str],
        resume_after: Option<u64>,
    ) -> Result<(Self, Vec<csv::StringRecord>)> {
        let mut kept = Vec::new();
        if let (Some(k), true) = (resume_after, path.exists()) {
            let mut r = csv::Reader::from_path(path)
                .with_context(|| format!("reading {}", path.display()))?;
            for rec in r.records() {
                let rec = rec?;
                let step: u64 = rec
                    .get(0)
                    .unwrap_or("")
                    .parse()
                    .context("bad step column")?;
                if step <= k {
                    kept.push(rec);
                }
            }
        }
        let file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(header)?;
        for rec in &kept {
            w.write_record(rec)?;
        }
        Ok((Self { w }, kept))
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.w.write_record(fields)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn diagnostics_row(r: &StepReport) -> Vec<String> {
    let mut row = vec![
        r.step.to_string(),
        fmt(r.time),
        r.order.to_string(),
        fmt(r.cfl),
        r.pressure.iterations.to_string(),
        fmt(r.pressure.final_residual),
    ];
    for v in &r.velocity {
        row.push(v.iterations.to_string());
        row.push(fmt(v.final_residual));
    }
    row.push(fmt(r.divergence));
    row.push(r.projection_size.to_string());
    row
}

/// Streaming drag and lift statistics for one tag.
#[derive(Debug, Clone, Default)]
pub struct ForceStats {
    pub cd: RunningStats,
    pub cl: RunningStats,
}

impl ForceStats {
    pub fn push(&mut self, f: &ForceRecord) {
        self.cd.push(f.drag());
        self.cl.push(f.lift());
    }
}

pub fn forces_row(step: u64, tag: &str, f: &ForceRecord, s: &ForceStats) -> Vec<String> {
    let mut row = vec![step.to_string(), fmt(f.time), tag.to_string()];
    row.extend(f.pressure.iter().chain(&f.viscous).map(|&x| fmt(x)));
    for x in [
        f.drag(),
        f.lift(),
        s.cd.mean(),
        s.cd.std(),
        s.cl.mean(),
        s.cl.std(),
    ] {
        row.push(fmt(x));
    }
    row
}
