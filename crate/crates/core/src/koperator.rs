//! The operator K: two decoupled linear elliptic solves
//! `(−Δ + λ_i + |β| t_j u_j²) w̃_i = μ_i t_i u_i³`, normalized so that
//! `∫u_i³ w_i = 1`, and the residual map `V(u) = u − K(u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{FieldPair, Mode, Problem, TScalars};
use crate::grid::{Field, Grid};

/// Default relative tolerance of the linear solves.
pub const DEFAULT_TOL_LIN: f64 = 1e-12;

/// One of the two symmetric positive definite systems behind K, in the
/// weighted form `W(−Δ_h + s)` with `W` the quadrature weights.
#[derive(Debug, Clone)]
pub struct LinearBlock<'g> {
    grid: &'g Grid,
    shift: Vec<f64>,
}

impl<'g> LinearBlock<'g> {
    /// Block for component `i` at the point `u` with scaling pair `(t1, t2)`.
    pub fn new(problem: &'g Problem, u: &FieldPair, t: (f64, f64), i: usize) -> Self {
        let j = 1 - i;
        let tj = if j == 0 { t.0 } else { t.1 };
        let c = problem.params.abs_beta() * tj;
        let lambda = problem.params.lambda(i);
        let shift = u.component(j).iter().map(|v| lambda + c * v * v).collect();
        LinearBlock { grid: &problem.grid, shift }
    }

    pub fn len(&self) -> usize {
        self.shift.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shift.is_empty()
    }

    /// `out = W(−Δ_h + s) x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.grid.stiffness_into(x, out);
        for (k, o) in out.iter_mut().enumerate() {
            *o += self.grid.weights()[k] * self.shift[k] * x[k];
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = self.grid.stiffness_diagonal();
        for (k, v) in d.iter_mut().enumerate() {
            *v += self.grid.weights()[k] * self.shift[k];
        }
        d
    }
}

/// Outcome of a preconditioned conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgStats {
    pub iterations: usize,
    /// Final preconditioned residual relative to the right-hand side.
    pub residual: f64,
}

/// Jacobi-preconditioned CG for `A x = b`, started from zero.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let norm_b = rz.sqrt();
    if norm_b == 0.0 {
        return Ok((x, CgStats { iterations: 0, residual: 0.0 }));
    }
    for it in 0..max_iter {
        let rel = rz.max(0.0).sqrt() / norm_b;
        if rel <= tol {
            return Ok((x, CgStats { iterations: it, residual: rel }));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Numerical(format!("operator not positive definite (pAp = {pap:e})")));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let rel = rz.max(0.0).sqrt() / norm_b;
    if rel <= tol {
        Ok((x, CgStats { iterations: max_iter, residual: rel }))
    } else {
        Err(Error::Solver { iterations: max_iter, residual: rel })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KResult {
    /// `K(u) = (w₁, w₂)`
    pub w: FieldPair,
    /// Normalization multipliers `α_i = 1/∫u_i³ w̃_i`.
    pub alpha: [f64; 2],
    pub stats: [CgStats; 2],
}

/// The cubic that drives component `i`: `u_i³`, or `(u₂⁺)³` for the second
/// component in semi-nodal mode.
pub(crate) fn source_cube(problem: &Problem, u: &FieldPair, i: usize) -> Vec<f64> {
    let semi = i == 1 && problem.mode() == Mode::SemiNodal;
    u.component(i)
        .iter()
        .map(|&v| {
            let v = if semi { v.max(0.0) } else { v };
            v * v * v
        })
        .collect()
}

fn solve_component(problem: &Problem, u: &FieldPair, t: (f64, f64), i: usize, tol: f64) -> Result<(Field, f64, CgStats)> {
    let g = &problem.grid;
    let block = LinearBlock::new(problem, u, t, i);
    let cube = source_cube(problem, u, i);
    let ti = if i == 0 { t.0 } else { t.1 };
    let coef = problem.params.mu(i) * ti;
    let rhs: Vec<f64> = cube.iter().zip(g.weights()).map(|(c, w)| coef * c * w).collect();
    let max_iter = 20 * g.len() + 200;
    let (wt, stats) = pcg(|x, out| block.apply(x, out), &block.diagonal(), &rhs, tol, max_iter)?;
    let denom = g.dot(&cube, &wt);
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "normalization integral for component {} is {denom:e}; point left the admissible set",
            i + 1
        )));
    }
    let alpha = 1.0 / denom;
    let w = Field::new(wt.into_iter().map(|v| alpha * v).collect());
    Ok((w, alpha, stats))
}

/// Evaluate `K(u)`. `t` must be the nondegenerate scaling pair of `u`.
pub fn solve_k(problem: &Problem, u: &FieldPair, t: TScalars, tol_lin: f64) -> Result<KResult> {
    if !(tol_lin > 0.0 && tol_lin <= 1e-6) {
        return Err(Error::Parameter(format!("tol_lin must lie in (0, 1e-6], got {tol_lin}")));
    }
    let t = t.require()?;
    let (r1, r2) = rayon::join(
        || solve_component(problem, u, t, 0, tol_lin),
        || solve_component(problem, u, t, 1, tol_lin),
    );
    let (w1, a1, s1) = r1?;
    let (w2, a2, s2) = r2?;
    Ok(KResult { w: problem.pair(w1, w2)?, alpha: [a1, a2], stats: [s1, s2] })
}

/// `V = u − K(u)` and `‖V‖_H`.
pub fn v_residual(problem: &Problem, u: &FieldPair, k: &KResult) -> Result<(FieldPair, f64)> {
    let diff = |a: &Field, b: &Field| Field::new(a.iter().zip(b.iter()).map(|(x, y)| x - y).collect());
    let v = problem.pair(diff(u.u1(), k.w.u1()), diff(u.u2(), k.w.u2()))?;
    let norm = (problem.norm_sq(&v, 0) + problem.norm_sq(&v, 1)).max(0.0).sqrt();
    Ok((v, norm))
}
