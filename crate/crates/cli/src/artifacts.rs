//! On-disk formats. Every file starts with a provenance line carrying the
//! artifact version and the config hash; numbers are written with 17
//! significant digits so that files re-read bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use nodal_core::analysis::OverlapMetrics;
use nodal_core::flow::{Classification, FlowReport, FlowStatus, TraceRow};
use nodal_core::{Field, FieldPair, Geometry, Grid, Problem};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn provenance(kind: &str, hash: &str) -> String {
    format!("# nodal {VERSION} {kind} config_sha256={hash}")
}

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    write(path, &s)
}

fn coordinate_names(grid: &Grid) -> &'static [&'static str] {
    match grid.geometry() {
        Geometry::Interval { .. } => &["x"],
        Geometry::Rectangle { .. } => &["x", "y"],
        Geometry::Radial { .. } => &["r"],
    }
}

/// Interior values as `node_index, coordinates…, u1, u2`.
pub fn solution_csv(grid: &Grid, pair: &FieldPair, hash: &str) -> String {
    let names = coordinate_names(grid);
    let mut out = provenance("solution", hash);
    out.push_str("\nnode_index,");
    out.push_str(&names.join(","));
    out.push_str(",u1,u2\n");
    for k in 0..grid.len() {
        let c = grid.coords(k);
        let _ = write!(out, "{}", grid.node_index(k));
        for x in &c[..names.len()] {
            let _ = write!(out, ",{}", num(*x));
        }
        let _ = writeln!(out, ",{},{}", num(pair.u1()[k]), num(pair.u2()[k]));
    }
    out
}

/// Header hash and pair of a solution file, checked against `grid`.
pub fn read_solution(path: &Path, problem: &Problem) -> Result<(String, FieldPair), CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, msg: String| CliError::usage(format!("{}:{line}: {msg}", path.display()));
    let mut lines = src.lines().enumerate();
    let hash = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix('#'))
        .and_then(|l| l.split_whitespace().find_map(|w| w.strip_prefix("config_sha256=")))
        .ok_or_else(|| bad(1, "missing provenance line".into()))?
        .to_string();
    let grid = &problem.grid;
    let ncoord = coordinate_names(grid).len();
    let header = lines.next().ok_or_else(|| bad(2, "missing header".into()))?.1;
    let expected = format!("node_index,{},u1,u2", coordinate_names(grid).join(","));
    if header.trim() != expected {
        return Err(bad(2, format!("header `{header}` does not match the grid, expected `{expected}`")));
    }
    let (mut u1, mut u2) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != ncoord + 3 {
            return Err(bad(i + 1, format!("expected {} columns, got {}", ncoord + 3, cells.len())));
        }
        let k = u1.len();
        let index: usize = cells[0].parse().map_err(|_| bad(i + 1, format!("bad node index `{}`", cells[0])))?;
        if k >= grid.len() || index != grid.node_index(k) {
            return Err(bad(i + 1, format!("node index {index} out of order")));
        }
        let value = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(i + 1, format!("bad number `{s}`")))
        };
        u1.push(value(cells[ncoord + 1])?);
        u2.push(value(cells[ncoord + 2])?);
    }
    if u1.len() != grid.len() {
        return Err(CliError::usage(format!(
            "{}: {} rows for a grid with {} interior nodes",
            path.display(),
            u1.len(),
            grid.len()
        )));
    }
    let pair = problem.pair(Field::new(u1), Field::new(u2)).map_err(|e| CliError::usage(e.to_string()))?;
    Ok((hash, pair))
}

pub fn trace_csv(trace: &[TraceRow], hash: &str) -> String {
    let mut out = provenance("trace", hash);
    out.push_str("\nstep,j,v_norm,dist_cone,dt\n");
    for r in trace {
        let _ = writeln!(out, "{},{},{},{},{}", r.step, num(r.j), num(r.v_norm), num(r.dist_cone), num(r.dt));
    }
    out
}

/// Per-run summary; field order is fixed so the JSON is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub artifact: String,
    pub version: String,
    pub config_sha256: String,
    pub rng_seed: u64,
    pub status: FlowStatus,
    pub message: Option<String>,
    pub steps: usize,
    pub classification: Classification,
    pub reason: Option<String>,
    pub energy: Option<f64>,
    pub j: f64,
    pub residual: Option<f64>,
    pub v_norm: f64,
    pub nodal_counts: Option<(usize, usize)>,
    pub alpha: Option<[f64; 2]>,
    pub alpha_deviation: Option<[f64; 2]>,
    pub t: Option<(f64, f64)>,
    pub tail_cone_distance: Option<f64>,
    pub overlap: Option<OverlapMetrics>,
    pub trace: Option<Vec<TraceRow>>,
}

impl Summary {
    pub fn new(problem: &Problem, report: &FlowReport, rng_seed: u64, hash: &str, with_trace: bool) -> Self {
        let s = report.solution.as_ref();
        Summary {
            artifact: "summary".into(),
            version: VERSION.into(),
            config_sha256: hash.into(),
            rng_seed,
            status: report.status,
            message: report.message.clone(),
            steps: report.state.step_count,
            classification: report.classification(),
            reason: s.and_then(|s| s.reason.clone()),
            energy: s.map(|s| s.energy),
            j: report.state.j,
            residual: s.map(|s| s.residual),
            v_norm: report.state.v_norm,
            nodal_counts: s.map(|s| s.nodal_counts),
            alpha: s.map(|s| s.alpha),
            alpha_deviation: s.map(|s| [(s.alpha[0] - 1.0).abs(), (s.alpha[1] - 1.0).abs()]),
            t: s.map(|s| s.t),
            tail_cone_distance: s.map(|s| s.tail_cone_distance),
            overlap: s.map(|s| nodal_core::analysis::overlap_metrics(problem, &s.pair)),
            trace: with_trace.then(|| report.trace.clone()),
        }
    }
}
