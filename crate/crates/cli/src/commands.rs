//! The four subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nodal_core::analysis::{beta_sweep, limit_structure_check, Check, SweepRow};
use nodal_core::flow::{pde_residual, solve, Classification, FlowReport, ACCEPT_TOL, EPS_SIGN};
use nodal_core::koperator::solve_k;
use nodal_core::nehari::{
    energy_upper_bound_check, miranda_project, nehari_residual, MirandaBox, NodalParts, DEFAULT_BOX_UPPER,
};
use nodal_core::{Field, FieldPair, Mode, Problem};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{self, num, provenance, Summary, VERSION};
use crate::config::{self, RunConfig};
use crate::{CliError, EXIT_NUMERICAL, EXIT_OK, EXIT_REJECTED};

pub const NEHARI_TOL: f64 = 1e-7;
pub const MIRANDA_TOL: f64 = 1e-8;
pub const ALPHA_TOL: f64 = 1e-6;
/// Samples per axis of the part-fiber energy scan.
pub const BOUND_SAMPLES: usize = 7;

/// Exit code plus what was written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub dir: PathBuf,
    pub lines: Vec<String>,
}

fn exit_for(report: &FlowReport) -> i32 {
    if !report.converged() {
        EXIT_NUMERICAL
    } else if report.classification() == Classification::Rejected {
        EXIT_REJECTED
    } else {
        EXIT_OK
    }
}

struct RunResult {
    seed: u64,
    code: i32,
    summary: Summary,
}

fn solve_one(cfg: &RunConfig, problem: &Problem, seed: u64, dir: &Path, hash: &str) -> Result<RunResult, CliError> {
    let report = match solve(problem, cfg.seed.kind(), seed, &cfg.solve) {
        Ok(r) => r,
        Err(e) => {
            artifacts::write(&dir.join("error.txt"), &format!("{}\n{e}\n", provenance("error", hash)))?;
            return Err(CliError::numerical(format!("seed {seed}: {e}")));
        }
    };
    let summary = Summary::new(problem, &report, seed, hash, cfg.output.trace);
    artifacts::write(&dir.join("config.toml"), &cfg.to_toml())?;
    artifacts::write_json(&dir.join("summary.json"), &summary)?;
    if cfg.output.trace {
        artifacts::write(&dir.join("trace.csv"), &artifacts::trace_csv(&report.trace, hash))?;
    }
    if let Some(s) = &report.solution {
        artifacts::write(&dir.join("solution.csv"), &artifacts::solution_csv(&problem.grid, &s.pair, hash))?;
    }
    Ok(RunResult { seed, code: exit_for(&report), summary })
}

fn describe(r: &RunResult) -> String {
    let s = &r.summary;
    match (s.energy, s.nodal_counts) {
        (Some(e), Some(n)) => format!(
            "seed {}: {:?} {:?} energy={e:.10e} nodal=({}, {}) residual={:.2e} steps={}",
            r.seed,
            s.status,
            s.classification,
            n.0,
            n.1,
            s.residual.unwrap_or(f64::NAN),
            s.steps
        ),
        _ => format!("seed {}: {:?} {}", r.seed, s.status, s.message.as_deref().unwrap_or("")),
    }
}

#[derive(Serialize)]
struct BatchEntry {
    rng_seed: u64,
    dir: String,
    exit_code: i32,
    classification: Classification,
    energy: Option<f64>,
    nodal_counts: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct Batch {
    artifact: &'static str,
    version: &'static str,
    config_sha256: String,
    runs: Vec<BatchEntry>,
    /// Seed of the least-energy run of the configured mode.
    selected: Option<u64>,
}

/// Solve for each configured seed; several seeds run on a worker pool, each
/// in its own subdirectory.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let problem = cfg.problem()?;
    let hash = cfg.hash();
    let dir = cfg.output_dir();
    let first = cfg.seed.rng_seed;
    if cfg.seed.count == 1 {
        let r = solve_one(cfg, &problem, first, &dir, &hash)?;
        let mut lines = vec![describe(&r)];
        lines.push(format!("wrote {}", dir.display()));
        return Ok(Outcome { code: r.code, dir, lines });
    }
    let seeds: Vec<u64> = (0..cfg.seed.count as u64).map(|m| first + m).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.output.workers)
        .build()
        .map_err(|e| CliError::usage(format!("worker pool: {e}")))?;
    let sub = |s: u64| format!("seed_{s:04}");
    let results: Vec<Result<RunResult, CliError>> =
        pool.install(|| seeds.par_iter().map(|&s| solve_one(cfg, &problem, s, &dir.join(sub(s)), &hash)).collect());

    let wanted = match cfg.params.mode {
        Mode::SignChanging => Classification::SignChanging,
        Mode::SemiNodal => Classification::SemiNodal,
    };
    let mut runs = Vec::new();
    let mut lines = Vec::new();
    let mut selected: Option<(f64, u64)> = None;
    for (s, r) in seeds.iter().zip(&results) {
        match r {
            Ok(r) => {
                lines.push(describe(r));
                if let (EXIT_OK, Some(e)) = (r.code, r.summary.energy) {
                    if r.summary.classification == wanted && selected.is_none_or(|(best, _)| e < best) {
                        selected = Some((e, *s));
                    }
                }
                runs.push(BatchEntry {
                    rng_seed: *s,
                    dir: sub(*s),
                    exit_code: r.code,
                    classification: r.summary.classification,
                    energy: r.summary.energy,
                    nodal_counts: r.summary.nodal_counts,
                });
            }
            Err(e) => {
                lines.push(format!("seed {s}: {e}"));
                runs.push(BatchEntry {
                    rng_seed: *s,
                    dir: sub(*s),
                    exit_code: e.code,
                    classification: Classification::Rejected,
                    energy: None,
                    nodal_counts: None,
                });
            }
        }
    }
    let batch = Batch {
        artifact: "batch",
        version: VERSION,
        config_sha256: hash,
        runs,
        selected: selected.map(|(_, s)| s),
    };
    artifacts::write_json(&dir.join("batch.json"), &batch)?;
    let code = if selected.is_some() {
        EXIT_OK
    } else if batch.runs.iter().any(|r| r.exit_code == EXIT_REJECTED) {
        EXIT_REJECTED
    } else {
        EXIT_NUMERICAL
    };
    if let Some((e, s)) = selected {
        lines.push(format!("least energy: seed {s} ({e:.10e})"));
    }
    lines.push(format!("wrote {}", dir.display()));
    Ok(Outcome { code, dir, lines })
}

#[derive(Serialize)]
struct SweepFile<'a> {
    artifact: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    rows: &'a [SweepRow],
    q_tail_monotone: bool,
    beta_q_bounded: bool,
    structure: Vec<Check>,
}

/// Run the coupling sweep; exit 0 only if every row converged to an
/// accepted solution.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Some(sw) = &cfg.sweep else {
        return Err(CliError::usage("[sweep] section with betas is required"));
    };
    let problem = cfg.problem()?;
    let hash = cfg.hash();
    let dir = cfg.output_dir();
    let report = beta_sweep(&problem, &sw.betas, (cfg.seed.kind(), cfg.seed.rng_seed), sw.policy, &cfg.solve)
        .map_err(|e| CliError::numerical(e.to_string()))?;
    let k = match cfg.seed.kind() {
        nodal_core::flow::SeedKind::DisjointBumps { k1, k2 } => (k1, k2),
        nodal_core::flow::SeedKind::SemiNodal { k1 } => (k1, 1),
        nodal_core::flow::SeedKind::RandomBalanced => (2, 2),
    };
    let structure = limit_structure_check(&problem.grid, &report, k, sw.support_tol);

    let mut csv = provenance("sweep", &hash);
    csv.push_str("\nbeta,converged,classification,continued,energy,q,beta_q,l1_product,nodal1,nodal2,max1,max2,residual,steps\n");
    let mut lines = Vec::new();
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{:?},{},{},{},{},{},{},{},{},{},{},{}",
            num(r.beta),
            r.converged,
            r.classification,
            r.continued,
            num(r.energy),
            num(r.q),
            num(r.beta_q),
            num(r.l1_product),
            r.nodal_counts.0,
            r.nodal_counts.1,
            num(r.max_abs[0]),
            num(r.max_abs[1]),
            num(r.residual),
            r.steps
        );
        let flag = if r.converged && r.classification != Classification::Rejected { "ok" } else { "FLAGGED" };
        lines.push(format!(
            "beta={:<10} {flag:<7} {:?} energy={:.8e} q={:.4e} |beta|q={:.4e}",
            r.beta, r.classification, r.energy, r.q, r.beta_q
        ));
    }
    artifacts::write(&dir.join("config.toml"), &cfg.to_toml())?;
    artifacts::write(&dir.join("sweep.csv"), &csv)?;
    artifacts::write_json(
        &dir.join("sweep.json"),
        &SweepFile {
            artifact: "sweep",
            version: VERSION,
            config_sha256: &hash,
            rows: &report.rows,
            q_tail_monotone: report.q_tail_monotone,
            beta_q_bounded: report.beta_q_bounded,
            structure: structure.clone(),
        },
    )?;
    if let Some(end) = report.endpoint() {
        artifacts::write(&dir.join("endpoint.csv"), &artifacts::solution_csv(&problem.grid, end, &hash))?;
    }
    for c in &structure {
        lines.push(format!("structure {}: {} ({})", c.name, if c.passed { "ok" } else { "no" }, c.detail));
    }
    lines.push(format!("wrote {}", dir.display()));
    let all_ok = report.rows.iter().all(|r| r.converged && r.classification != Classification::Rejected);
    Ok(Outcome { code: if all_ok { EXIT_OK } else { EXIT_REJECTED }, dir, lines })
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub artifact: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn sibling_config(solution: &Path) -> PathBuf {
    solution.parent().unwrap_or(Path::new(".")).join("config.toml")
}

fn load_solution(solution: &Path, config: Option<&Path>) -> Result<(RunConfig, Problem, String, FieldPair), CliError> {
    let cfg_path = config.map(Path::to_path_buf).unwrap_or_else(|| sibling_config(solution));
    let cfg = config::load(&cfg_path)?;
    let problem = cfg.problem()?;
    let hash = cfg.hash();
    let (file_hash, pair) = artifacts::read_solution(solution, &problem)?;
    if file_hash != hash {
        return Err(CliError::usage(format!(
            "{}: config hash {file_hash} does not match {} ({hash})",
            solution.display(),
            cfg_path.display()
        )));
    }
    Ok((cfg, problem, hash, pair))
}

fn changes_sign(u: &Field) -> bool {
    let thr = EPS_SIGN * u.max_abs();
    u.iter().any(|v| *v > thr) && u.iter().any(|v| *v < -thr)
}

fn nonnegative(u: &Field) -> bool {
    let thr = EPS_SIGN * u.max_abs();
    u.iter().any(|v| *v > thr) && u.iter().all(|v| *v >= -thr)
}

/// Certificate battery for a rescaled solution pair.
pub fn certificate_checks(cfg: &RunConfig, problem: &Problem, pair: &FieldPair) -> Vec<Check> {
    let mut checks = Vec::new();

    let res = pde_residual(problem, pair);
    checks.push(Check::new("pde_residual", res <= ACCEPT_TOL, format!("{res:.3e} (tol {ACCEPT_TOL:.0e})")));

    let signs = match problem.mode() {
        Mode::SignChanging => changes_sign(pair.u1()) && changes_sign(pair.u2()),
        Mode::SemiNodal => changes_sign(pair.u1()) && nonnegative(pair.u2()),
    };
    checks.push(Check::new("sign_structure", signs, format!("{:?}", problem.mode())));

    match nehari_residual(problem, pair) {
        Ok(r) => {
            let m = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            checks.push(Check::new("nehari_residual", m <= NEHARI_TOL, format!("{m:.3e} (tol {NEHARI_TOL:.0e})")));
        }
        Err(e) => checks.push(Check::new("nehari_residual", false, e.to_string())),
    }

    let parts = NodalParts::split(problem, pair);
    let ones = vec![1.0; parts.count()];
    let projected = MirandaBox::for_parts(problem, &parts, DEFAULT_BOX_UPPER).and_then(|bx| miranda_project(problem, &parts, bx));
    match projected {
        Ok(p) => {
            let dev = p.scalars.iter().fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
            checks.push(Check::new("miranda", dev <= MIRANDA_TOL, format!("max |s - 1| = {dev:.3e} (tol {MIRANDA_TOL:.0e})")));
        }
        Err(e) => checks.push(Check::new("miranda", false, e.to_string())),
    }

    match energy_upper_bound_check(problem, &parts, &ones, BOUND_SAMPLES) {
        Ok(b) => checks.push(Check::new(
            "energy_upper_bound",
            b.holds,
            format!("sampled max {:.10e} vs energy {:.10e}", b.sampled_max, b.energy),
        )),
        Err(e) => checks.push(Check::new("energy_upper_bound", false, e.to_string())),
    }

    let alpha = problem
        .normalize(pair)
        .and_then(|u| problem.t_map(&u).map(|t| (u, t)))
        .and_then(|(u, t)| solve_k(problem, &u, t, cfg.solve.tol_lin));
    match alpha {
        Ok(k) => {
            let dev = k.alpha.iter().fold(0.0f64, |m, a| m.max((a - 1.0).abs()));
            checks.push(Check::new("alpha", dev <= ALPHA_TOL, format!("max |alpha - 1| = {dev:.3e} (tol {ALPHA_TOL:.0e})")));
        }
        Err(e) => checks.push(Check::new("alpha", false, e.to_string())),
    }
    checks
}

/// Re-check a solution file; writes `verify.json` next to it.
pub fn cmd_verify(solution: &Path, config: Option<&Path>) -> Result<Verdict, CliError> {
    let (cfg, problem, hash, pair) = load_solution(solution, config)?;
    let checks = certificate_checks(&cfg, &problem, &pair);
    let verdict = Verdict {
        artifact: "verify",
        version: VERSION,
        config_sha256: hash,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    artifacts::write_json(&solution.with_file_name("verify.json"), &verdict)?;
    Ok(verdict)
}

/// Wide table over every grid node, boundary included:
/// coordinates, `u1`, `u2`, `u1·u2`.
pub fn cmd_export(solution: &Path, config: Option<&Path>, format: &str, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let sep = match format {
        "csv" => ",",
        "tsv" => "\t",
        other => return Err(CliError::usage(format!("unknown export format `{other}` (expected csv or tsv)"))),
    };
    let (_, problem, hash, pair) = load_solution(solution, config)?;
    let g = &problem.grid;
    let coords: &[&str] = match g.geometry() {
        nodal_core::Geometry::Interval { .. } => &["x"],
        nodal_core::Geometry::Rectangle { .. } => &["x", "y"],
        nodal_core::Geometry::Radial { .. } => &["r"],
    };
    let mut s = provenance("export", &hash);
    s.push('\n');
    s.push_str(&[coords, &["u1", "u2", "product"]].concat().join(sep));
    s.push('\n');
    for m in 0..g.node_count() {
        let c = g.node_coords(m);
        let (a, b) = g.interior_index(m).map_or((0.0, 0.0), |k| (pair.u1()[k], pair.u2()[k]));
        let mut cells: Vec<String> = c[..coords.len()].iter().map(|x| num(*x)).collect();
        cells.extend([num(a), num(b), num(a * b)]);
        s.push_str(&cells.join(sep));
        s.push('\n');
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| solution.with_file_name(format!("export.{format}")));
    artifacts::write(&path, &s)?;
    Ok(path)
}
