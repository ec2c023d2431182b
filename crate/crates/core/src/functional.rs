//! Variational quantities: the energy, the two-parameter scaling map
//! `t(u)`, the reduced functional `J_β` on the L⁴ constraint manifold and
//! its derivative, cone distances, and manifold membership.
//!
//! In [`Mode::SemiNodal`] the quartic self-interaction of the second
//! component is taken on its positive part, `∫(u₂⁺)⁴`, and the constraint
//! `|u₂|₄ = 1` becomes `|u₂⁺|₄ = 1`. Everything else is shared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ksum, Field, Grid};

/// Tolerance on `|u_i|₄ = 1` for membership of the constraint manifold.
pub const MANIFOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Both components change sign.
    SignChanging,
    /// First component changes sign, second is positive.
    SemiNodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    pub mode: Mode,
}

impl Params {
    pub fn new(lambda1: f64, lambda2: f64, mu1: f64, mu2: f64, beta: f64, mode: Mode) -> Result<Self> {
        let p = Params { lambda1, lambda2, mu1, mu2, beta, mode };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric parameters `λ_i = λ`, `μ_i = μ`.
    pub fn symmetric(lambda: f64, mu: f64, beta: f64, mode: Mode) -> Result<Self> {
        Self::new(lambda, lambda, mu, mu, beta, mode)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta.is_finite() && self.beta < 0.0) {
            return Err(Error::Parameter(format!(
                "coupling beta must be strictly negative (repulsive), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let p = Params { beta, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn abs_beta(&self) -> f64 {
        self.beta.abs()
    }

    /// `λ_i` for component `i ∈ {0, 1}`.
    pub fn lambda(&self, i: usize) -> f64 {
        [self.lambda1, self.lambda2][i]
    }

    pub fn mu(&self, i: usize) -> f64 {
        [self.mu1, self.mu2][i]
    }
}

/// Integrals of a single field that the functional needs.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FieldStats {
    /// `∫ |∇u|²` (summation-by-parts form)
    grad: f64,
    /// `∫ u²`
    mass: f64,
    /// `∫ u⁴`
    quartic: f64,
    /// `∫ (u⁺)⁴`
    quartic_plus: f64,
    /// `∫ (u⁻)⁴`
    quartic_minus: f64,
}

impl FieldStats {
    fn of(grid: &Grid, u: &[f64]) -> Self {
        let part = |sign: f64| {
            ksum(u.iter().zip(grid.weights()).map(|(v, w)| {
                let p = (sign * v).max(0.0);
                let s = p * p;
                s * s * w
            }))
        };
        let (quartic_plus, quartic_minus) = (part(1.0), part(-1.0));
        FieldStats {
            grad: grid.dirichlet_form(u),
            mass: grid.dot(u, u),
            quartic: grid.quartic(u),
            quartic_plus,
            quartic_minus,
        }
    }
}

/// The pair `(u₁, u₂)` on a shared grid, with cached integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    u: [Field; 2],
    stats: [FieldStats; 2],
    overlap: f64,
}

impl FieldPair {
    pub fn new(grid: &Grid, u1: Field, u2: Field) -> Result<Self> {
        grid.check(&u1)?;
        grid.check(&u2)?;
        if !(u1.is_finite() && u2.is_finite()) {
            return Err(Error::Numerical("field contains non-finite values".into()));
        }
        let stats = [FieldStats::of(grid, &u1), FieldStats::of(grid, &u2)];
        let overlap = ksum(u1.iter().zip(u2.iter()).zip(grid.weights()).map(|((a, b), w)| a * a * b * b * w));
        Ok(FieldPair { u: [u1, u2], stats, overlap })
    }

    pub fn u1(&self) -> &Field {
        &self.u[0]
    }

    pub fn u2(&self) -> &Field {
        &self.u[1]
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.u[i]
    }

    pub fn into_fields(self) -> (Field, Field) {
        let [a, b] = self.u;
        (a, b)
    }

    /// `∫ u₁² u₂²`
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// `∫ |∇u_i|²`
    pub fn gradient_sq(&self, i: usize) -> f64 {
        self.stats[i].grad
    }

    /// `∫ u_i²`
    pub fn mass(&self, i: usize) -> f64 {
        self.stats[i].mass
    }

    /// `∫ u_i⁴`
    pub fn quartic(&self, i: usize) -> f64 {
        self.stats[i].quartic
    }

    /// `∫ (u_i⁺)⁴`
    pub fn quartic_plus(&self, i: usize) -> f64 {
        self.stats[i].quartic_plus
    }

    /// `∫ (u_i⁻)⁴`
    pub fn quartic_minus(&self, i: usize) -> f64 {
        self.stats[i].quartic_minus
    }

    /// `‖u_i‖²_λ`
    pub fn norm_sq(&self, i: usize, lambda: f64) -> f64 {
        self.stats[i].grad + lambda * self.stats[i].mass
    }

    /// σ₁(u) = (−u₁, u₂)
    pub fn sigma1(&self) -> FieldPair {
        let mut p = self.clone();
        p.u[0] = p.u[0].negated();
        p.stats[0].quartic_plus = self.stats[0].quartic_minus;
        p.stats[0].quartic_minus = self.stats[0].quartic_plus;
        p
    }

    /// σ₂(u) = (u₁, −u₂)
    pub fn sigma2(&self) -> FieldPair {
        let mut p = self.clone();
        p.u[1] = p.u[1].negated();
        p.stats[1].quartic_plus = self.stats[1].quartic_minus;
        p.stats[1].quartic_minus = self.stats[1].quartic_plus;
        p
    }
}

/// Solution of the 2×2 scaling system, or the marker that the fiber
/// energy is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TScalars {
    Pair { t1: f64, t2: f64 },
    Degenerate,
}

impl TScalars {
    pub fn pair(&self) -> Option<(f64, f64)> {
        match *self {
            TScalars::Pair { t1, t2 } => Some((t1, t2)),
            TScalars::Degenerate => None,
        }
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.pair().map(|(a, b)| if i == 0 { a } else { b })
    }

    pub fn require(&self) -> Result<(f64, f64)> {
        self.pair()
            .ok_or_else(|| Error::Precondition("scaling pair is degenerate; point is outside M_β".into()))
    }

    pub fn min(&self) -> Option<f64> {
        self.pair().map(|(a, b)| a.min(b))
    }
}

/// Membership flags for the sets M*, M and M_β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub in_mstar: bool,
    pub in_m: bool,
    pub in_mbeta: bool,
}

/// Which components enter a cone distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeComponents {
    First,
    Second,
    Both,
}

/// `dist₄` to the cone of one-signed functions: the smaller of `|u_i⁺|₄`
/// and `|u_i⁻|₄`, minimized over the selected components.
pub fn cone_distance(pair: &FieldPair, which: ConeComponents) -> f64 {
    let comp = |i: usize| pair.quartic_plus(i).min(pair.quartic_minus(i)).powf(0.25);
    match which {
        ConeComponents::First => comp(0),
        ConeComponents::Second => comp(1),
        ConeComponents::Both => comp(0).min(comp(1)),
    }
}

/// A grid with a parameter set: everything needed to evaluate the
/// functional.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub params: Params,
}

impl Problem {
    pub fn new(grid: Grid, params: Params) -> Result<Self> {
        params.validate()?;
        Ok(Problem { grid, params })
    }

    pub fn mode(&self) -> Mode {
        self.params.mode
    }

    pub fn with_params(&self, params: Params) -> Result<Self> {
        Problem::new(self.grid.clone(), params)
    }

    pub fn pair(&self, u1: Field, u2: Field) -> Result<FieldPair> {
        FieldPair::new(&self.grid, u1, u2)
    }

    /// `‖u_i‖²_{λ_i}`
    pub fn norm_sq(&self, pair: &FieldPair, i: usize) -> f64 {
        pair.norm_sq(i, self.params.lambda(i))
    }

    /// The quartic that enters the energy and the constraint for component
    /// `i`: `∫u_i⁴`, or `∫(u₂⁺)⁴` for the second component in semi-nodal mode.
    pub fn constraint_quartic(&self, pair: &FieldPair, i: usize) -> f64 {
        if i == 1 && self.mode() == Mode::SemiNodal {
            pair.quartic_plus(1)
        } else {
            pair.quartic(i)
        }
    }

    /// The L⁴ quantity constrained to one on M.
    pub fn constraint_norm(&self, pair: &FieldPair, i: usize) -> f64 {
        self.constraint_quartic(pair, i).powf(0.25)
    }

    pub fn energy(&self, pair: &FieldPair) -> f64 {
        self.fiber_energy(pair, 1.0, 1.0)
    }

    /// `E(√s₁ u₁, √s₂ u₂)` from the cached integrals.
    pub fn fiber_energy(&self, pair: &FieldPair, s1: f64, s2: f64) -> f64 {
        let p = &self.params;
        let (n1, n2) = (self.norm_sq(pair, 0), self.norm_sq(pair, 1));
        let (a, b) = (self.constraint_quartic(pair, 0), self.constraint_quartic(pair, 1));
        0.5 * (s1 * n1 + s2 * n2) - 0.25 * (s1 * s1 * p.mu1 * a + s2 * s2 * p.mu2 * b)
            + 0.5 * p.abs_beta() * s1 * s2 * pair.overlap()
    }

    /// Unique maximizer of `(s₁, s₂) ↦ E(√s₁ u₁, √s₂ u₂)` in closed form.
    pub fn t_map(&self, pair: &FieldPair) -> Result<TScalars> {
        if pair.u1().is_zero() {
            return Err(Error::Precondition("t_map needs u₁ ≢ 0".into()));
        }
        let b = self.constraint_quartic(pair, 1);
        if b == 0.0 {
            return Err(Error::Precondition(match self.mode() {
                Mode::SignChanging => "t_map needs u₂ ≢ 0".into(),
                Mode::SemiNodal => "t_map needs u₂⁺ ≢ 0".into(),
            }));
        }
        let p = &self.params;
        let a = self.constraint_quartic(pair, 0);
        let q = pair.overlap();
        let bb = p.abs_beta();
        let (n1, n2) = (self.norm_sq(pair, 0), self.norm_sq(pair, 1));
        let det = p.mu1 * p.mu2 * a * b - bb * bb * q * q;
        if !(det > 0.0) {
            return Ok(TScalars::Degenerate);
        }
        let t1 = (p.mu2 * b * n1 + bb * n2 * q) / det;
        let t2 = (p.mu1 * a * n2 + bb * n1 * q) / det;
        Ok(TScalars::Pair { t1, t2 })
    }

    /// The fiber maximum `sup_{s≥0} E(√s₁ u₁, √s₂ u₂)` in closed form, or
    /// `+∞` when the scaling system is degenerate.
    pub fn fiber_max(&self, pair: &FieldPair) -> Result<f64> {
        Ok(match self.t_map(pair)? {
            TScalars::Pair { t1, t2 } => 0.25 * (t1 * self.norm_sq(pair, 0) + t2 * self.norm_sq(pair, 1)),
            TScalars::Degenerate => f64::INFINITY,
        })
    }

    /// Reduced functional `J_β` on `M*`; `+∞` outside `M**_β`.
    pub fn j_value(&self, pair: &FieldPair) -> Result<f64> {
        let m = self.membership(pair);
        if !m.in_mstar {
            return Err(Error::Precondition(format!(
                "J_β is defined on M* only (L⁴ norms {:.4}, {:.4} must exceed 1/2)",
                self.constraint_norm(pair, 0),
                self.constraint_norm(pair, 1)
            )));
        }
        Ok(self.j_unchecked(pair))
    }

    /// `¼(t₁‖u₁‖² + t₂‖u₂‖²)`. Invariant under rescaling either component,
    /// which keeps it insensitive to rounding in the projection onto M.
    pub(crate) fn j_unchecked(&self, pair: &FieldPair) -> f64 {
        self.fiber_max(pair).unwrap_or(f64::INFINITY)
    }

    /// The closed form `¼(μ₂N₁² + 2|β|N₁N₂q + μ₁N₂²)/(μ₁μ₂ − β²q²)` in
    /// terms of `N_i = ‖u_i‖²`. Agrees with [`Problem::j_value`] on M.
    pub fn j_quadratic_form(&self, pair: &FieldPair) -> f64 {
        let p = &self.params;
        let bb = p.abs_beta();
        let q = pair.overlap();
        let (n1, n2) = (self.norm_sq(pair, 0), self.norm_sq(pair, 1));
        let den = p.mu1 * p.mu2 - bb * bb * q * q;
        if !(den > 0.0) {
            return f64::INFINITY;
        }
        0.25 * (p.mu2 * n1 * n1 + 2.0 * bb * n1 * n2 * q + p.mu1 * n2 * n2) / den
    }

    /// `J_β'(u)[dir]`, valid on `M_β` with `t = t_map(u)`.
    pub fn j_directional(&self, pair: &FieldPair, t: TScalars, dir: &FieldPair) -> Result<f64> {
        let (t1, t2) = t.require()?;
        let p = &self.params;
        let g = &self.grid;
        let bb = p.abs_beta();
        let (u1, u2) = (pair.u1(), pair.u2());
        let (phi, psi) = (dir.u1(), dir.u2());
        let lin1 = g.bilinear(u1, phi) + p.lambda1 * g.dot(u1, phi);
        let lin2 = g.bilinear(u2, psi) + p.lambda2 * g.dot(u2, psi);
        let w = g.weights();
        let c1 = ksum((0..g.len()).map(|k| u1[k] * u2[k] * u2[k] * phi[k] * w[k]));
        let c2 = ksum((0..g.len()).map(|k| u1[k] * u1[k] * u2[k] * psi[k] * w[k]));
        Ok(t1 * lin1 + t2 * lin2 + t1 * t2 * bb * (c1 + c2))
    }

    /// Mode-aware cone distance: both components when sign-changing, the
    /// first component only in semi-nodal mode.
    pub fn cone_distance(&self, pair: &FieldPair) -> f64 {
        match self.mode() {
            Mode::SignChanging => cone_distance(pair, ConeComponents::Both),
            Mode::SemiNodal => cone_distance(pair, ConeComponents::First),
        }
    }

    pub fn membership(&self, pair: &FieldPair) -> Membership {
        let n1 = self.constraint_norm(pair, 0);
        let n2 = self.constraint_norm(pair, 1);
        let in_mstar = n1 > 0.5 && n2 > 0.5;
        let in_m = (n1 - 1.0).abs() <= MANIFOLD_TOL && (n2 - 1.0).abs() <= MANIFOLD_TOL;
        let nondegenerate = matches!(self.t_map(pair), Ok(TScalars::Pair { .. }));
        Membership { in_mstar, in_m, in_mbeta: in_m && in_mstar && nondegenerate }
    }

    /// Rescale each component so the pair lies on M.
    pub fn normalize(&self, pair: &FieldPair) -> Result<FieldPair> {
        let n1 = self.constraint_norm(pair, 0);
        let n2 = self.constraint_norm(pair, 1);
        if !(n1 > 0.0 && n2 > 0.0) {
            return Err(Error::Precondition("cannot normalize a pair with a vanishing component".into()));
        }
        self.pair(pair.u1().scaled(1.0 / n1), pair.u2().scaled(1.0 / n2))
    }

    /// `(√t₁ u₁, √t₂ u₂)`.
    pub fn rescale(&self, pair: &FieldPair, t: TScalars) -> Result<FieldPair> {
        let (t1, t2) = t.require()?;
        self.pair(pair.u1().scaled(t1.sqrt()), pair.u2().scaled(t2.sqrt()))
    }
}
