//! On-disk layout of a solve:
//!
//! ```text
//! <dir>/problem.json          {"problem": ..., "solver": ...}
//! <dir>/trace.csv             t,dt,supnorm,boundary_max   (one row per step; dt = 0 on the first row)
//! <dir>/verdict.json
//! <dir>/snapshots/index.csv   index,t,boundary_max,file
//! <dir>/snapshots/snap_NNNNNN.csv   r,u
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a directory
//! back reproduces the trace exactly.

use std::fs;
use std::path::Path;

use heatlab::solver::{BlowupVerdict, ProblemSpec, RadialGrid, SolutionTrace, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_trace_dir(dir: &Path, trace: &SolutionTrace, verdict: &BlowupVerdict) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    write_json(
        &dir.join("problem.json"),
        &ProblemFile {
            problem: trace.problem.clone(),
            solver: trace.config.clone(),
        },
    )?;
    write_json(&dir.join("verdict.json"), verdict)?;

    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    w.write_record(["t", "dt", "supnorm", "boundary_max"])?;
    for (k, &(t, s)) in trace.supnorm_history.iter().enumerate() {
        let dt = if k == 0 { 0.0 } else { trace.dt_history[k - 1] };
        w.write_record([num(t), num(dt), num(s), num(trace.boundary_history[k])])?;
    }
    w.flush()?;

    let mut index = csv::Writer::from_path(dir.join("snapshots").join("index.csv"))?;
    index.write_record(["index", "t", "boundary_max", "file"])?;
    let nodes = trace.grid.nodes();
    for (k, (t, u)) in trace.times.iter().zip(&trace.snapshots).enumerate() {
        let name = format!("snap_{k:06}.csv");
        let mut s = csv::Writer::from_path(dir.join("snapshots").join(&name))?;
        s.write_record(["r", "u"])?;
        for (r, v) in nodes.iter().zip(u) {
            s.write_record([num(*r), num(*v)])?;
        }
        s.flush()?;
        index.write_record([k.to_string(), num(*t), num(trace.boundary_monitor[k]), name])?;
    }
    index.flush()?;
    Ok(())
}

fn parse_f64(field: Option<&str>, path: &Path) -> Result<f64> {
    field
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| CliError::Parse(format!("{}: malformed number", path.display())))
}

/// Reconstructs a trace written by [`write_trace_dir`].
pub fn read_trace_dir(dir: &Path) -> Result<(SolutionTrace, Option<BlowupVerdict>)> {
    let pf: ProblemFile = read_json(&dir.join("problem.json"))?;
    let verdict_path = dir.join("verdict.json");
    let verdict = if verdict_path.exists() {
        Some(read_json(&verdict_path)?)
    } else {
        None
    };
    let grid = RadialGrid::new(pf.problem.r_max, pf.solver.cells).map_err(|e| CliError::Validation(e.to_string()))?;

    let trace_path = dir.join("trace.csv");
    let mut supnorm_history = Vec::new();
    let mut dt_history = Vec::new();
    let mut boundary_history = Vec::new();
    for (k, rec) in csv::Reader::from_path(&trace_path)?.records().enumerate() {
        let rec = rec?;
        let t = parse_f64(rec.get(0), &trace_path)?;
        let dt = parse_f64(rec.get(1), &trace_path)?;
        let s = parse_f64(rec.get(2), &trace_path)?;
        let b = parse_f64(rec.get(3), &trace_path)?;
        supnorm_history.push((t, s));
        boundary_history.push(b);
        if k > 0 {
            dt_history.push(dt);
        }
    }

    let snap_dir = dir.join("snapshots");
    let index_path = snap_dir.join("index.csv");
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut boundary_monitor = Vec::new();
    for rec in csv::Reader::from_path(&index_path)?.records() {
        let rec = rec?;
        times.push(parse_f64(rec.get(1), &index_path)?);
        boundary_monitor.push(parse_f64(rec.get(2), &index_path)?);
        let file = rec
            .get(3)
            .ok_or_else(|| CliError::Parse(format!("{}: missing file column", index_path.display())))?;
        let path = snap_dir.join(file);
        let mut u = Vec::with_capacity(grid.cells + 1);
        for row in csv::Reader::from_path(&path)?.records() {
            u.push(parse_f64(row?.get(1), &path)?);
        }
        if u.len() != grid.cells + 1 {
            return Err(CliError::Parse(format!(
                "{}: {} values, grid has {} nodes",
                path.display(),
                u.len(),
                grid.cells + 1
            )));
        }
        snapshots.push(u);
    }
    if times.is_empty() {
        return Err(CliError::Parse(format!("{}: no snapshots", index_path.display())));
    }
    Ok((
        SolutionTrace {
            problem: pf.problem,
            config: pf.solver,
            grid,
            times,
            snapshots,
            supnorm_history,
            dt_history,
            boundary_monitor,
            boundary_history,
        },
        verdict,
    ))
}
