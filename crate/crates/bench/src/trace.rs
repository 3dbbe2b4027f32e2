//! Trace CSV files.

use std::fs;
use std::path::Path;

use balpa_core::distributed::DistRecord;
use balpa_core::solvers::TraceRecord;
use serde::Serialize;

use crate::error::{BenchError, Result};

pub const TRACE_HEADER: [&str; 8] = [
    "iter",
    "objective",
    "constraint_violation",
    "fixed_point_residual",
    "relative_error",
    "ergodic_gap",
    "wall_time_s",
    "epochs",
];

#[derive(Serialize)]
struct Row {
    iter: usize,
    objective: f64,
    constraint_violation: f64,
    fixed_point_residual: f64,
    relative_error: Option<f64>,
    ergodic_gap: Option<f64>,
    wall_time_s: f64,
    epochs: f64,
}

#[derive(Serialize)]
struct DistRow {
    iter: usize,
    objective: f64,
    constraint_violation: f64,
    fixed_point_residual: f64,
    relative_error: Option<f64>,
    ergodic_gap: Option<f64>,
    wall_time_s: f64,
    epochs: f64,
    consensus_violation: f64,
    messages_sent: u64,
}

impl From<&TraceRecord> for Row {
    fn from(r: &TraceRecord) -> Self {
        Row {
            iter: r.iter,
            objective: r.objective,
            constraint_violation: r.constraint_violation,
            fixed_point_residual: r.fixed_point_residual,
            relative_error: r.relative_error,
            ergodic_gap: r.ergodic_gap,
            wall_time_s: r.wall_time_s,
            epochs: r.epochs,
        }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = writer(path)?;
    if trace.is_empty() {
        w.write_record(TRACE_HEADER)?;
    }
    for r in trace {
        w.serialize(Row::from(r))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn write_dist_trace(path: &Path, trace: &[DistRecord]) -> Result<()> {
    let mut w = writer(path)?;
    for r in trace {
        w.serialize(DistRow {
            iter: r.round,
            objective: r.objective,
            constraint_violation: r.constraint_violation,
            fixed_point_residual: r.fixed_point_residual,
            relative_error: r.relative_error,
            ergodic_gap: None,
            wall_time_s: r.wall_time_s,
            epochs: r.epochs,
            consensus_violation: r.consensus_violation,
            messages_sent: r.messages_sent,
        })?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Reads two numeric columns, skipping rows where either is empty.
pub fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BenchError::Config(format!("{} has no column {name:?}", path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let (a, b) = (rec.get(ix).unwrap_or(""), rec.get(iy).unwrap_or(""));
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let parse = |t: &str| t.parse::<f64>().map_err(|_| BenchError::parse(path, i + 2, format!("bad number {t:?}")));
        xs.push(parse(a)?);
        ys.push(parse(b)?);
    }
    Ok((xs, ys))
}
