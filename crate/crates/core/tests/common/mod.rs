#![allow(dead_code)]

use std::f64::consts::PI;

use nodal_core::flow::{solve, FlowReport, SeedKind, SolveOptions};
use nodal_core::{Field, FieldPair, Grid, GridSpec, Mode, Params, Problem};

pub fn interval(n: usize) -> Grid {
    Grid::new(GridSpec::interval(0.0, 1.0, n)).unwrap()
}

pub fn problem_1d(n: usize, beta: f64, mode: Mode) -> Problem {
    Problem::new(interval(n), Params::symmetric(1.0, 1.0, beta, mode).unwrap()).unwrap()
}

pub fn problem_2d(n: usize, beta: f64) -> Problem {
    let g = Grid::new(GridSpec::rectangle(0.0, 1.0, 0.0, 1.0, n, n)).unwrap();
    Problem::new(g, Params::symmetric(1.0, 1.0, beta, Mode::SignChanging).unwrap()).unwrap()
}

/// A fixed pair with overlapping sign-changing components.
pub fn generic_pair(p: &Problem) -> FieldPair {
    let u1 = p.grid.sample(|x| (2.0 * PI * x[0]).sin() + 0.3 * (PI * x[0]).sin());
    let u2 = p.grid.sample(|x| (3.0 * PI * x[0]).sin() + 0.6 * (PI * x[0]).sin());
    p.pair(u1, u2).unwrap()
}

pub fn solved(p: &Problem) -> FlowReport {
    let r = solve(p, SeedKind::DisjointBumps { k1: 2, k2: 2 }, 0, &SolveOptions::default()).unwrap();
    assert!(r.converged(), "{:?}", r.message);
    r
}

/// Plain left-to-right weighted sum.
pub fn naive_dot(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..g.len() {
        s += g.weights()[k] * a[k] * b[k];
    }
    s
}

pub fn naive_quartic(g: &Grid, u: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..g.len() {
        s += g.weights()[k] * u[k].powi(4);
    }
    s
}

/// `∫ u (−Δ_h v) + λ ∫ u v` through the public Laplacian.
pub fn naive_lambda_inner(g: &Grid, u: &Field, v: &Field, lambda: f64) -> f64 {
    let lv = g.laplacian(v).unwrap();
    let neg: Vec<f64> = lv.iter().map(|x| -x).collect();
    naive_dot(g, u, &neg) + lambda * naive_dot(g, u, v)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
