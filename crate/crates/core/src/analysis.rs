//! Post-solve diagnostics: nodal domains, overlap and segregation metrics,
//! and the continuation sweep towards strong repulsion.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{solve, run_flow, Classification, FlowReport, SeedKind, SolveOptions, EPS_SIGN};
use crate::functional::{FieldPair, Problem};
use crate::grid::{Field, Grid};

/// Connected components of `mask` under the grid's neighbour relation.
pub fn count_components(grid: &Grid, mask: &[bool]) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            for n in grid.neighbours(k) {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    count
}

/// Number of components of `{u > ε max|u|}` plus those of `{u < −ε max|u|}`.
pub fn count_nodal_domains(grid: &Grid, u: &Field, eps_sign: f64) -> usize {
    let thr = eps_sign * u.max_abs();
    if u.max_abs() == 0.0 {
        return 0;
    }
    let pos: Vec<bool> = u.iter().map(|v| *v > thr).collect();
    let neg: Vec<bool> = u.iter().map(|v| *v < -thr).collect();
    count_components(grid, &pos) + count_components(grid, &neg)
}

/// Components of the support `{|u| > tol max|u|}`.
pub fn count_support_components(grid: &Grid, u: &Field, tol: f64) -> usize {
    let thr = tol * u.max_abs();
    if u.max_abs() == 0.0 {
        return 0;
    }
    let mask: Vec<bool> = u.iter().map(|v| v.abs() > thr).collect();
    count_components(grid, &mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapMetrics {
    /// `∫ u₁² u₂²`
    pub q: f64,
    /// `|β| q`
    pub beta_q: f64,
    /// `∫ |u₁ u₂|`
    pub l1_product: f64,
}

pub fn overlap_metrics(problem: &Problem, pair: &FieldPair) -> OverlapMetrics {
    let q = pair.overlap();
    let l1 = pair
        .u1()
        .iter()
        .zip(pair.u2().iter())
        .zip(problem.grid.weights())
        .map(|((a, b), w)| (a * b).abs() * w)
        .sum();
    OverlapMetrics { q, beta_q: problem.params.abs_beta() * q, l1_product: l1 }
}

/// Whether `|u₁ u₂| ≤ tol max|u₁| max|u₂|` at every node, and the measure
/// of the nodes where it fails.
pub fn segregation_check(grid: &Grid, pair: &FieldPair, tol: f64) -> Result<(bool, f64)> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("segregation tolerance must be positive, got {tol}")));
    }
    let bound = tol * pair.u1().max_abs() * pair.u2().max_abs();
    let mut measure = 0.0;
    for ((a, b), w) in pair.u1().iter().zip(pair.u2().iter()).zip(grid.weights()) {
        if (a * b).abs() > bound {
            measure += w;
        }
    }
    Ok((measure == 0.0, measure))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Warm-start each β from the previous solution.
    #[default]
    Continuation,
    /// Fresh seed at every β.
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub converged: bool,
    pub classification: Classification,
    /// Whether this row was warm-started from the previous one.
    pub continued: bool,
    pub energy: f64,
    pub q: f64,
    pub beta_q: f64,
    pub l1_product: f64,
    pub nodal_counts: (usize, usize),
    pub max_abs: [f64; 2],
    pub residual: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `q` non-increasing over the converged rows of the second half.
    pub q_tail_monotone: bool,
    /// `|β| q` within twice its first-row value on every converged row.
    pub beta_q_bounded: bool,
    /// Rescaled solution per row.
    #[serde(skip)]
    pub profiles: Vec<Option<FieldPair>>,
}

impl SweepReport {
    pub fn beta_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.beta).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn endpoint(&self) -> Option<&FieldPair> {
        self.profiles.last().and_then(|p| p.as_ref())
    }
}

fn accepted(report: &FlowReport) -> bool {
    report.converged() && report.classification() != Classification::Rejected
}

fn make_row(problem: &Problem, beta: f64, report: &FlowReport, continued: bool) -> SweepRow {
    match &report.solution {
        Some(sol) if accepted(report) => {
            let m = overlap_metrics(problem, &sol.pair);
            SweepRow {
                beta,
                converged: true,
                classification: sol.classification,
                continued,
                energy: sol.energy,
                q: m.q,
                beta_q: m.beta_q,
                l1_product: m.l1_product,
                nodal_counts: sol.nodal_counts,
                max_abs: [sol.pair.u1().max_abs(), sol.pair.u2().max_abs()],
                residual: sol.residual,
                steps: report.state.step_count,
            }
        }
        _ => SweepRow {
            beta,
            converged: false,
            classification: report.classification(),
            continued,
            energy: f64::NAN,
            q: f64::NAN,
            beta_q: f64::NAN,
            l1_product: f64::NAN,
            nodal_counts: (0, 0),
            max_abs: [f64::NAN; 2],
            residual: report.solution.as_ref().map_or(f64::NAN, |s| s.residual),
            steps: report.state.step_count,
        },
    }
}

/// Solve along a strictly decreasing list of couplings.
pub fn beta_sweep(
    base: &Problem,
    betas: &[f64],
    seed: (SeedKind, u64),
    policy: SeedPolicy,
    opts: &SolveOptions,
) -> Result<SweepReport> {
    if betas.is_empty() {
        return Err(Error::Parameter("sweep needs at least one coupling value".into()));
    }
    if betas.iter().any(|b| !(*b < 0.0)) || betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("sweep couplings must be negative and strictly decreasing".into()));
    }
    let mut rows = Vec::with_capacity(betas.len());
    let mut profiles = Vec::with_capacity(betas.len());
    let mut previous: Option<FieldPair> = None;
    for &beta in betas {
        let problem = base.with_params(base.params.with_beta(beta)?)?;
        let mut outcome = None;
        if policy == SeedPolicy::Continuation {
            if let Some(prev) = &previous {
                // back onto M; t is re-solved for the new coupling
                if let Ok(start) = problem.normalize(prev) {
                    if problem.membership(&start).in_mbeta {
                        if let Ok(r) = run_flow(&problem, &start, opts) {
                            if accepted(&r) {
                                outcome = Some((r, true));
                            }
                        }
                    }
                }
            }
        }
        let (report, continued) = match outcome {
            Some(o) => o,
            None => (solve(&problem, seed.0, seed.1, opts)?, false),
        };
        let row = make_row(&problem, beta, &report, continued);
        let profile = if row.converged { report.solution.as_ref().map(|s| s.pair.clone()) } else { None };
        if row.converged {
            previous = report.solution.as_ref().map(|s| s.manifold.clone());
        }
        rows.push(row);
        profiles.push(profile);
    }
    let done: Vec<&SweepRow> = rows.iter().filter(|r| r.converged).collect();
    let tail = &done[done.len() / 2..];
    let q_tail_monotone = tail.windows(2).all(|w| w[1].q <= w[0].q);
    let beta_q_bounded = done.first().is_none_or(|f| done.iter().all(|r| r.beta_q <= 2.0 * f.beta_q));
    Ok(SweepReport { rows, q_tail_monotone, beta_q_bounded, profiles })
}

/// One named pass/fail check with a human-readable detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// Expected limit structure of the endpoint profile for a run seeded with
/// `(k₁, k₂)` bumps; `k₂ = 1` means a positive second component.
///
/// Components of `{u ≠ 0}` are counted sign by sign: a positive and a
/// negative region meeting at a zero are two components even when no node
/// falls below the threshold between them.
pub fn limit_structure_check(grid: &Grid, report: &SweepReport, k: (usize, usize), tol: f64) -> Vec<Check> {
    let Some(end) = report.endpoint().filter(|_| report.rows.last().is_some_and(|r| r.converged)) else {
        return vec![Check::new("endpoint", false, "last sweep row did not converge")];
    };
    let c1 = count_nodal_domains(grid, end.u1(), tol);
    let c2 = count_nodal_domains(grid, end.u2(), tol);
    let mut out = Vec::new();
    if k.1 == 1 {
        out.push(Check::new("u1 nodal domains", c1 <= k.0 && c1 >= 1, format!("{c1} (at most {})", k.0)));
        out.push(Check::new("u2 nodal domains", c2 == 1, format!("{c2}")));
        let positive = end.u2().iter().all(|v| *v >= -EPS_SIGN * end.u2().max_abs());
        out.push(Check::new("u2 positive", positive, format!("min u2 = {:.3e}", end.u2().iter().cloned().fold(f64::INFINITY, f64::min))));
    } else if k.0 == 1 && k.1 == 1 {
        out.push(Check::new("nodal domains", c1 == 1 && c2 == 1, format!("({c1}, {c2})")));
    } else {
        out.push(Check::new("u1 nodal domains", c1 == k.0, format!("{c1} (expected {})", k.0)));
        out.push(Check::new("u2 nodal domains", c2 == k.1, format!("{c2} (expected {})", k.1)));
    }
    out
}
