//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string; the plain-Rust functions behind them
//! are public so they can be tested natively.

use nodal_core::analysis::{beta_sweep, SeedPolicy};
use nodal_core::flow::{initial_seed, solve, SeedKind, SolveOptions};
use nodal_core::{Grid, GridSpec, Mode, Params, Problem};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request; keeps a solve under a few seconds.
pub const MAX_NODES: usize = 1025;

fn problem(beta: f64, nodes: usize, mode: Mode) -> Result<Problem, String> {
    if !(3..=MAX_NODES).contains(&nodes) {
        return Err(format!("nodes must lie in 3..={MAX_NODES}"));
    }
    let grid = Grid::new(GridSpec::interval(0.0, 1.0, nodes)).map_err(|e| e.to_string())?;
    let params = Params::symmetric(1.0, 1.0, beta, mode).map_err(|e| e.to_string())?;
    Problem::new(grid, params).map_err(|e| e.to_string())
}

fn seed_kind(mode: Mode, k1: usize) -> SeedKind {
    match mode {
        Mode::SignChanging => SeedKind::DisjointBumps { k1, k2: 2 },
        Mode::SemiNodal => SeedKind::SemiNodal { k1 },
    }
}

fn mode_of(semi_nodal: bool) -> Mode {
    if semi_nodal {
        Mode::SemiNodal
    } else {
        Mode::SignChanging
    }
}

/// Runs the flow on `[0, 1]` and returns the profiles with boundary zeros.
pub fn solve_profile(beta: f64, nodes: usize, semi_nodal: bool, k1: usize, rng_seed: u64) -> Result<Value, String> {
    let mode = mode_of(semi_nodal);
    let p = problem(beta, nodes, mode)?;
    let report = solve(&p, seed_kind(mode, k1), rng_seed, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let g = &p.grid;
    let x: Vec<f64> = (0..g.node_count()).map(|m| g.node_coords(m)[0]).collect();
    let full = |f: &[f64]| -> Vec<f64> { (0..g.node_count()).map(|m| g.interior_index(m).map_or(0.0, |k| f[k])).collect() };
    let j: Vec<f64> = report.trace.iter().map(|r| r.j).collect();
    let base = json!({
        "status": format!("{:?}", report.status),
        "classification": format!("{:?}", report.classification()),
        "steps": report.state.step_count,
        "v_norm": report.state.v_norm,
        "trace_j": j,
        "x": x,
    });
    let mut out = base;
    let obj = out.as_object_mut().expect("object literal");
    match &report.solution {
        Some(s) => {
            obj.insert("u1".into(), json!(full(s.pair.u1())));
            obj.insert("u2".into(), json!(full(s.pair.u2())));
            obj.insert("energy".into(), json!(s.energy));
            obj.insert("residual".into(), json!(s.residual));
            obj.insert("nodal_counts".into(), json!([s.nodal_counts.0, s.nodal_counts.1]));
        }
        None => {
            let u = &report.state.u;
            obj.insert("u1".into(), json!(full(u.u1())));
            obj.insert("u2".into(), json!(full(u.u2())));
        }
    }
    Ok(out)
}

/// Energy on the fiber `(s₁, s₂) ↦ E(√s₁ u₁, √s₂ u₂)` through the
/// normalized seed, sampled on `[0, 3t₁] × [0, 3t₂]`.
pub fn landscape(beta: f64, nodes: usize, rng_seed: u64, resolution: usize) -> Result<Value, String> {
    if !(2..=200).contains(&resolution) {
        return Err("resolution must lie in 2..=200".into());
    }
    let p = problem(beta, nodes, Mode::SignChanging)?;
    let seed = initial_seed(&p, SeedKind::RandomBalanced, rng_seed).map_err(|e| e.to_string())?;
    let u = p.normalize(&seed).map_err(|e| e.to_string())?;
    let Some((t1, t2)) = p.t_map(&u).map_err(|e| e.to_string())?.pair() else {
        return Err("the seed is degenerate for this coupling".into());
    };
    let step = |t: f64, i: usize| 3.0 * t * i as f64 / (resolution - 1) as f64;
    let values: Vec<Vec<f64>> = (0..resolution)
        .map(|k| (0..resolution).map(|i| p.fiber_energy(&u, step(t1, i), step(t2, k))).collect())
        .collect();
    Ok(json!({
        "t": [t1, t2],
        "j": p.j_value(&u).map_err(|e| e.to_string())?,
        "s1_max": 3.0 * t1,
        "s2_max": 3.0 * t2,
        "values": values,
    }))
}

/// Continuation sweep over the given couplings.
pub fn sweep(betas: &[f64], nodes: usize, semi_nodal: bool) -> Result<Value, String> {
    let mode = mode_of(semi_nodal);
    let first = *betas.first().ok_or("no couplings given")?;
    let p = problem(first, nodes, mode)?;
    let rep = beta_sweep(&p, betas, (seed_kind(mode, 2), 0), SeedPolicy::Continuation, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let rows: Vec<Value> = rep
        .rows
        .iter()
        .map(|r| {
            json!({
                "beta": r.beta,
                "converged": r.converged,
                "energy": r.energy,
                "q": r.q,
                "beta_q": r.beta_q,
                "nodal_counts": [r.nodal_counts.0, r.nodal_counts.1],
                "steps": r.steps,
            })
        })
        .collect();
    Ok(json!({ "rows": rows, "q_tail_monotone": rep.q_tail_monotone, "beta_q_bounded": rep.beta_q_bounded }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_1d(beta: f64, nodes: usize, semi_nodal: bool, k1: usize, rng_seed: u32) -> Result<String, JsError> {
    to_js(solve_profile(beta, nodes, semi_nodal, k1, rng_seed.into()))
}

#[wasm_bindgen]
pub fn fiber_landscape(beta: f64, nodes: usize, rng_seed: u32, resolution: usize) -> Result<String, JsError> {
    to_js(landscape(beta, nodes, rng_seed.into(), resolution))
}

#[wasm_bindgen]
pub fn beta_sweep_1d(betas: Vec<f64>, nodes: usize, semi_nodal: bool) -> Result<String, JsError> {
    to_js(sweep(&betas, nodes, semi_nodal))
}
