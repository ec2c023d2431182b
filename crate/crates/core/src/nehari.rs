//! The Nehari-type set, the Miranda projection onto it, the sup identity
//! over the four-parameter fiber, and least-energy selection.
//!
//! A pair is split into signed pieces: `u_i⁺` and `−u_i⁻` for each
//! sign-changing component, or the whole `u₂` in semi-nodal mode. Scaling
//! piece `a` by `√s_a` and recombining gives a point whose energy is
//!
//! ```text
//! E(s) = ½ Σ_ab √(s_a s_b) G_ab − ¼ Σ_a μ s_a² Q_a + ½|β| Σ_{a∈1,b∈2} s_a s_b C_ab
//! ```
//!
//! with `G` the λ-inner products of pieces of the same component, `Q` their
//! quartics and `C` the cross overlaps. The projection solves
//! `f_a = 2 ∂E/∂s_a = 0`. In the continuum `G_ab = 0` for `a ≠ b`; on the
//! grid the stencil couples the two sides of a nodal interface and the term
//! is kept so that discrete solutions sit exactly at `s = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Classification, Solution};
use crate::functional::{FieldPair, Mode, Problem};
use crate::grid::{ksum, Field};
use crate::koperator::source_cube;

/// Default upper corner of the Miranda box.
pub const DEFAULT_BOX_UPPER: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SecondComponent {
    Split { plus: Field, minus: Field },
    /// Semi-nodal mode: `u₂` is scaled as a whole.
    Whole(Field),
}

/// Nonnegative parts `u_i^±` with `u_i = u_i⁺ − u_i⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalParts {
    pub u1_plus: Field,
    pub u1_minus: Field,
    pub second: SecondComponent,
}

impl NodalParts {
    /// Split by nodewise thresholding; the second component is kept whole
    /// in semi-nodal mode.
    pub fn split(problem: &Problem, pair: &FieldPair) -> Self {
        let second = match problem.mode() {
            Mode::SignChanging => SecondComponent::Split {
                plus: pair.u2().positive_part(),
                minus: pair.u2().negative_part(),
            },
            Mode::SemiNodal => SecondComponent::Whole(pair.u2().clone()),
        };
        NodalParts { u1_plus: pair.u1().positive_part(), u1_minus: pair.u1().negative_part(), second }
    }

    /// 4, or 3 when the second component is whole.
    pub fn count(&self) -> usize {
        match self.second {
            SecondComponent::Split { .. } => 4,
            SecondComponent::Whole(_) => 3,
        }
    }

    /// Signed pieces and their component index, in the order
    /// `(u₁⁺, u₁⁻, u₂⁺, u₂⁻)` or `(u₁⁺, u₁⁻, u₂)`.
    fn pieces(&self) -> Vec<(usize, Field)> {
        let mut v = vec![(0, self.u1_plus.clone()), (0, self.u1_minus.negated())];
        match &self.second {
            SecondComponent::Split { plus, minus } => {
                v.push((1, plus.clone()));
                v.push((1, minus.negated()));
            }
            SecondComponent::Whole(u2) => v.push((1, u2.clone())),
        }
        v
    }

    /// `(Σ √s_a p_a)` per component for scalars in the canonical order.
    pub fn recombine(&self, problem: &Problem, s: &[f64]) -> Result<FieldPair> {
        let pieces = self.pieces();
        if s.len() != pieces.len() {
            return Err(Error::Precondition(format!("expected {} scalars, got {}", pieces.len(), s.len())));
        }
        let n = problem.grid.len();
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for ((comp, piece), si) in pieces.iter().zip(s) {
            let c = si.sqrt();
            for (o, v) in out[*comp].iter_mut().zip(piece.iter()) {
                *o += c * v;
            }
        }
        let [a, b] = out;
        problem.pair(Field::new(a), Field::new(b))
    }
}

/// The corner box `[a, b]^k` of the Miranda argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirandaBox {
    pub a: f64,
    pub b: f64,
}

impl MirandaBox {
    /// `a = ½ min_a ‖p_a‖²/(μ Q_a)`, with the given upper corner.
    pub fn for_parts(problem: &Problem, parts: &NodalParts, b: f64) -> Result<Self> {
        let sys = PartSystem::new(problem, parts)?;
        let a = 0.5 * (0..sys.len()).map(|k| sys.g[k][k] / (sys.mu[k] * sys.q[k])).fold(f64::INFINITY, f64::min);
        let bx = MirandaBox { a, b };
        bx.validate()?;
        Ok(bx)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0 && self.b > 1.0 && self.b.is_finite()) {
            return Err(Error::Precondition(format!("Miranda box needs 0 < a < 1 < b, got a={}, b={}", self.a, self.b)));
        }
        Ok(())
    }
}

/// Coefficients of the fiber system for `k` pieces.
#[derive(Debug, Clone)]
pub(crate) struct PartSystem {
    comp: Vec<usize>,
    g: Vec<Vec<f64>>,
    q: Vec<f64>,
    c: Vec<Vec<f64>>,
    mu: Vec<f64>,
    abs_beta: f64,
}

impl PartSystem {
    pub(crate) fn new(problem: &Problem, parts: &NodalParts) -> Result<Self> {
        let pieces = parts.pieces();
        Self::from_pieces(problem, &pieces)
    }

    fn from_pieces(problem: &Problem, pieces: &[(usize, Field)]) -> Result<Self> {
        let g = &problem.grid;
        let k = pieces.len();
        let semi = problem.mode() == Mode::SemiNodal;
        let names = ["u1+", "u1-", "u2+", "u2-"];
        for (a, (comp, p)) in pieces.iter().enumerate() {
            if p.is_zero() {
                let name = if k == 3 && a == 2 { "u2" } else { names[a] };
                return Err(Error::Precondition(format!("part {name} (component {}) vanishes", comp + 1)));
            }
        }
        let mut gm = vec![vec![0.0; k]; k];
        let mut cm = vec![vec![0.0; k]; k];
        let mut q = vec![0.0; k];
        for a in 0..k {
            let (ca, pa) = &pieces[a];
            let lambda = problem.params.lambda(*ca);
            for b in a..k {
                let (cb, pb) = &pieces[b];
                if ca == cb {
                    let v = g.bilinear(pa, pb) + lambda * g.dot(pa, pb);
                    gm[a][b] = v;
                    gm[b][a] = v;
                } else {
                    let v = ksum(pa.iter().zip(pb.iter()).zip(g.weights()).map(|((x, y), w)| x * x * y * y * w));
                    cm[a][b] = v;
                    cm[b][a] = v;
                }
            }
            q[a] = if semi && *ca == 1 {
                ksum(pa.iter().zip(g.weights()).map(|(v, w)| v.max(0.0).powi(4) * w))
            } else {
                g.quartic(pa)
            };
            if !(q[a] > 0.0) {
                return Err(Error::Precondition(format!("part {} has no positive mass", a + 1)));
            }
        }
        Ok(PartSystem {
            comp: pieces.iter().map(|(c, _)| *c).collect(),
            g: gm,
            q,
            c: cm,
            mu: pieces.iter().map(|(c, _)| problem.params.mu(*c)).collect(),
            abs_beta: problem.params.abs_beta(),
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.q.len()
    }

    pub(crate) fn residual(&self, s: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|a| self.residual_one(s, a)).collect()
    }

    fn residual_one(&self, s: &[f64], a: usize) -> f64 {
        let mut f = -self.mu[a] * s[a] * self.q[a];
        for b in 0..self.len() {
            if self.comp[b] == self.comp[a] {
                f += if a == b { self.g[a][a] } else { (s[b] / s[a]).sqrt() * self.g[a][b] };
            } else {
                f += self.abs_beta * s[b] * self.c[a][b];
            }
        }
        f
    }

    fn jacobian(&self, s: &[f64]) -> Vec<Vec<f64>> {
        let k = self.len();
        let mut jm = vec![vec![0.0; k]; k];
        for a in 0..k {
            let mut d = -self.mu[a] * self.q[a];
            for b in 0..k {
                if b == a {
                    continue;
                }
                if self.comp[b] == self.comp[a] {
                    d -= 0.5 * self.g[a][b] * s[b].sqrt() * s[a].powf(-1.5);
                    jm[a][b] = 0.5 * self.g[a][b] / (s[a] * s[b]).sqrt();
                } else {
                    jm[a][b] = self.abs_beta * self.c[a][b];
                }
            }
            jm[a][a] = d;
        }
        jm
    }

    pub(crate) fn energy(&self, s: &[f64]) -> f64 {
        let k = self.len();
        let mut e = 0.0;
        for a in 0..k {
            e -= 0.25 * self.mu[a] * s[a] * s[a] * self.q[a];
            for b in 0..k {
                if self.comp[a] == self.comp[b] {
                    e += 0.5 * (s[a] * s[b]).sqrt() * self.g[a][b];
                } else if self.comp[a] == 0 {
                    e += 0.5 * self.abs_beta * s[a] * s[b] * self.c[a][b];
                }
            }
        }
        e
    }

    /// Sign-independent ordering so that negating a component permutes
    /// its pieces without changing the arithmetic of the solve.
    fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let key = |a: usize| {
            let cross: f64 = self.c[a].iter().sum();
            (self.comp[a], self.q[a], self.g[a][a], cross)
        };
        idx.sort_by(|&x, &y| {
            let (kx, ky) = (key(x), key(y));
            kx.0.cmp(&ky.0)
                .then(kx.1.total_cmp(&ky.1))
                .then(kx.2.total_cmp(&ky.2))
                .then(kx.3.total_cmp(&ky.3))
        });
        idx
    }

    fn permuted(&self, order: &[usize]) -> PartSystem {
        let k = order.len();
        PartSystem {
            comp: order.iter().map(|&a| self.comp[a]).collect(),
            g: (0..k).map(|i| (0..k).map(|j| self.g[order[i]][order[j]]).collect()).collect(),
            q: order.iter().map(|&a| self.q[a]).collect(),
            c: (0..k).map(|i| (0..k).map(|j| self.c[order[i]][order[j]]).collect()).collect(),
            mu: order.iter().map(|&a| self.mu[a]).collect(),
            abs_beta: self.abs_beta,
        }
    }
}

/// Solve the small dense system `m x = r` by Gaussian elimination with
/// partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let k = r.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            for c in col..k {
                m[row][c] -= f * m[col][c];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| m[row][c] * x[c]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// How the projection root was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMethod {
    Newton,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTraceRow {
    pub iteration: usize,
    pub scalars: [f64; 4],
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `(t₁⁺, t₁⁻, t₂⁺, t₂⁻)` or `(t₁⁺, t₁⁻, t₂)`.
    pub scalars: Vec<f64>,
    pub max_residual: f64,
    pub method: RootMethod,
    pub trace: Vec<ProjectionTraceRow>,
}

/// Target accuracy of the projection root.
pub const PROJECTION_TOL: f64 = 1e-8;

fn check_corners(sys: &PartSystem, bx: MirandaBox) -> Result<()> {
    let k = sys.len();
    for a in 0..k {
        // f_a is decreasing in s_a and nondecreasing in the others, so the
        // all-a and all-b corners are the binding ones.
        let lo = sys.residual_one(&vec![bx.a; k], a);
        let hi = sys.residual_one(&vec![bx.b; k], a);
        if !(lo > 0.0) {
            return Err(Error::Precondition(format!("corner condition fails: f_{} = {lo:e} ≤ 0 at s = a", a + 1)));
        }
        if !(hi < 0.0) {
            return Err(Error::Precondition(format!("corner condition fails: f_{} = {hi:e} ≥ 0 at s = b", a + 1)));
        }
    }
    Ok(())
}

fn push_trace(trace: &mut Vec<ProjectionTraceRow>, it: usize, s: &[f64], res: f64) {
    let mut scalars = [f64::NAN; 4];
    scalars[..s.len()].copy_from_slice(s);
    trace.push(ProjectionTraceRow { iteration: it, scalars, max_residual: res });
}

fn newton(sys: &PartSystem, bx: MirandaBox, tol: f64, trace: &mut Vec<ProjectionTraceRow>) -> Option<Vec<f64>> {
    let k = sys.len();
    // start from all ones or from the uncoupled roots, whichever is closer
    let ones = vec![1.0f64.clamp(bx.a, bx.b); k];
    let uncoupled: Vec<f64> = (0..k).map(|a| (sys.g[a][a] / (sys.mu[a] * sys.q[a])).clamp(bx.a, bx.b)).collect();
    let mut s = if max_abs(&sys.residual(&ones)) <= max_abs(&sys.residual(&uncoupled)) { ones } else { uncoupled };
    let mut f = sys.residual(&s);
    let mut res = max_abs(&f);
    push_trace(trace, 0, &s, res);
    for it in 1..=100 {
        if res < tol {
            return Some(s);
        }
        let jm = sys.jacobian(&s);
        let step = solve_dense(jm, f.iter().map(|v| -v).collect())?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = s.iter().zip(&step).map(|(x, d)| (x + lambda * d).clamp(bx.a, bx.b)).collect();
            let ft = sys.residual(&trial);
            let rt = max_abs(&ft);
            if rt < res || lambda < 1e-6 {
                s = trial;
                f = ft;
                res = rt;
                break;
            }
            lambda *= 0.5;
        }
        push_trace(trace, it, &s, res);
        if lambda < 1e-6 {
            return None;
        }
    }
    (res < tol).then_some(s)
}

/// Monotone iteration from the upper corner: each coordinate is set to the
/// root of its own equation by bisection. The system is cooperative, so the
/// iterates decrease to the largest root in the box.
fn bisection(sys: &PartSystem, bx: MirandaBox, tol: f64, trace: &mut Vec<ProjectionTraceRow>) -> Option<Vec<f64>> {
    let k = sys.len();
    let mut s = vec![bx.b; k];
    for it in 0..10_000 {
        for a in 0..k {
            let (mut lo, mut hi) = (bx.a, bx.b);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                s[a] = mid;
                if sys.residual_one(&s, a) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * hi {
                    break;
                }
            }
            s[a] = 0.5 * (lo + hi);
        }
        let res = max_abs(&sys.residual(&s));
        push_trace(trace, it, &s, res);
        if res < tol {
            return Some(s);
        }
    }
    None
}

fn project_system(sys: &PartSystem, bx: MirandaBox, tol: f64) -> Result<Projection> {
    bx.validate()?;
    check_corners(sys, bx)?;
    let order = sys.canonical_order();
    let ps = sys.permuted(&order);
    let mut trace = Vec::new();
    let (local, method) = match newton(&ps, bx, tol, &mut trace) {
        Some(s) => (s, RootMethod::Newton),
        None => match bisection(&ps, bx, tol, &mut trace) {
            Some(s) => (s, RootMethod::Bisection),
            None => return Err(Error::Numerical("Miranda projection did not converge".into())),
        },
    };
    let mut scalars = vec![0.0; local.len()];
    for (i, &a) in order.iter().enumerate() {
        scalars[a] = local[i];
    }
    for row in &mut trace {
        let mut unpermuted = [f64::NAN; 4];
        for (i, &a) in order.iter().enumerate() {
            unpermuted[a] = row.scalars[i];
        }
        row.scalars = unpermuted;
    }
    let max_residual = max_abs(&sys.residual(&scalars));
    Ok(Projection { scalars, max_residual, method, trace })
}

/// Scalars that put the recombined pair on the Nehari set.
pub fn miranda_project(problem: &Problem, parts: &NodalParts, bx: MirandaBox) -> Result<Projection> {
    let sys = PartSystem::new(problem, parts)?;
    project_system(&sys, bx, PROJECTION_TOL)
}

/// The Nehari residual system `f(s)` in canonical part order.
pub fn fiber_residuals(problem: &Problem, parts: &NodalParts, s: &[f64]) -> Result<Vec<f64>> {
    let sys = PartSystem::new(problem, parts)?;
    if s.len() != sys.len() {
        return Err(Error::Precondition(format!("expected {} scalars, got {}", sys.len(), s.len())));
    }
    Ok(sys.residual(s))
}

/// Energy of the recombined pair as a function of the part scalars.
pub fn fiber_energy(problem: &Problem, parts: &NodalParts, s: &[f64]) -> Result<f64> {
    let sys = PartSystem::new(problem, parts)?;
    if s.len() != sys.len() {
        return Err(Error::Precondition(format!("expected {} scalars, got {}", sys.len(), s.len())));
    }
    Ok(sys.energy(s))
}

/// `E'(u)` paired with each signed piece `u_i⁺`, `−u_i⁻` (or `u₂` whole in
/// semi-nodal mode).
pub fn nehari_residual(problem: &Problem, pair: &FieldPair) -> Result<Vec<f64>> {
    let parts = NodalParts::split(problem, pair);
    let pieces = parts.pieces();
    let g = &problem.grid;
    let bb = problem.params.abs_beta();
    let mut out = Vec::with_capacity(pieces.len());
    let cubes = [source_cube(problem, pair, 0), source_cube(problem, pair, 1)];
    for (a, (i, phi)) in pieces.iter().enumerate() {
        if phi.is_zero() {
            return Err(Error::Precondition(format!("nodal part {} vanishes", a + 1)));
        }
        let (ui, uj) = (pair.component(*i), pair.component(1 - i));
        let lin = g.bilinear(ui, phi) + problem.params.lambda(*i) * g.dot(ui, phi);
        let cubic = g.dot(&cubes[*i], phi);
        let coupling = ksum((0..g.len()).map(|k| ui[k] * uj[k] * uj[k] * phi[k] * g.weights()[k]));
        out.push(lin - problem.params.mu(*i) * cubic + bb * coupling);
    }
    Ok(out)
}

/// Outcome of the sampled sup check over the part fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub sampled_max: f64,
    pub energy: f64,
    pub holds: bool,
}

/// Samples the recombined energy on an `m^k` grid of `[0, 2]^k` and on the
/// supplied projection scalars, and compares the maximum with `E(u)`.
pub fn energy_upper_bound_check(
    problem: &Problem,
    parts: &NodalParts,
    proj: &[f64],
    samples_per_axis: usize,
) -> Result<UpperBoundReport> {
    let sys = PartSystem::new(problem, parts)?;
    let k = sys.len();
    if proj.len() != k {
        return Err(Error::Precondition(format!("expected {k} scalars, got {}", proj.len())));
    }
    let m = samples_per_axis.max(2);
    let energy = sys.energy(&vec![1.0; k]);
    let mut best = sys.energy(proj);
    let mut idx = vec![0usize; k];
    let mut s = vec![0.0; k];
    loop {
        for a in 0..k {
            s[a] = 2.0 * idx[a] as f64 / (m - 1) as f64;
        }
        best = best.max(sys.energy(&s));
        let mut a = 0;
        while a < k {
            idx[a] += 1;
            if idx[a] < m {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == k {
            break;
        }
    }
    Ok(UpperBoundReport { sampled_max: best, energy, holds: best <= energy + 1e-8 })
}

/// Lowest-energy member of the batch in the given class; ties go to the
/// smaller PDE residual.
pub fn least_energy_select(batch: &[Solution], class: Classification) -> Result<&Solution> {
    batch
        .iter()
        .filter(|s| s.classification == class)
        .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.residual.total_cmp(&b.residual)))
        .ok_or(Error::EmptyBatch)
}

/// Rebalances a pair through its part fiber: project the parts onto the
/// Nehari set and recombine. Returns `None` when the box corners do not
/// bracket a root or a part vanishes.
pub(crate) fn rebalance(problem: &Problem, pair: &FieldPair) -> Option<FieldPair> {
    let parts = NodalParts::split(problem, pair);
    let sys = PartSystem::new(problem, &parts).ok()?;
    let k = sys.len();
    let a = 0.5 * (0..k).map(|i| sys.g[i][i] / (sys.mu[i] * sys.q[i])).fold(f64::INFINITY, f64::min);
    let mut b = 2.0 * (0..k).map(|i| sys.g[i][i] / (sys.mu[i] * sys.q[i])).fold(1.0, f64::max);
    for _ in 0..60 {
        if (0..k).all(|i| sys.residual_one(&vec![b; k], i) < 0.0) {
            break;
        }
        b *= 2.0;
    }
    let bx = MirandaBox { a: a.min(0.5), b };
    let scale = (0..k).map(|i| sys.g[i][i]).fold(0.0, f64::max);
    let proj = project_system(&sys, bx, 1e-13 * scale).ok()?;
    parts.recombine(problem, &proj.scalars).ok()
}
