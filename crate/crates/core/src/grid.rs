//! Finite-difference discretization of the domain.
//!
//! Three geometries are supported: an interval and a rectangle with
//! homogeneous Dirichlet data, and a radial half-line `[0, R]` standing in
//! for radially symmetric functions on the whole space, truncated at `R`
//! with a Dirichlet condition there.
//!
//! Fields store values at interior nodes only; boundary values are zero by
//! construction. Quadrature is mass-lumped: trapezoid weights on the
//! Cartesian grids and exact shell volumes `ω_N (r_{k+1/2}^N − r_{k-1/2}^N)/N`
//! on the radial grid, so constants integrate exactly. The radial
//! Laplacian is the matching finite-volume stencil, which makes `−Δ_h`
//! symmetric in the weighted inner product on every geometry.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
    /// Radially symmetric functions on `R^dim`, truncated at `r_max`.
    Radial { dim: u32, r_max: f64 },
}

impl Geometry {
    pub fn is_two_dimensional(&self) -> bool {
        matches!(self, Geometry::Rectangle { .. })
    }
}

/// Geometry plus resolution, counted in nodes per axis including the
/// boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub geometry: Geometry,
    pub nodes: Vec<usize>,
}

impl GridSpec {
    pub fn interval(a: f64, b: f64, n: usize) -> Self {
        Self { geometry: Geometry::Interval { a, b }, nodes: vec![n] }
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize) -> Self {
        Self { geometry: Geometry::Rectangle { ax, bx, ay, by }, nodes: vec![nx, ny] }
    }

    pub fn radial(dim: u32, r_max: f64, n: usize) -> Self {
        Self { geometry: Geometry::Radial { dim, r_max }, nodes: vec![n] }
    }
}

/// One real-valued grid function, stored at interior nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn zeros(len: usize) -> Self {
        Field(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field(self.0.iter().map(|v| c * v).collect())
    }

    pub fn negated(&self) -> Field {
        Field(self.0.iter().map(|v| -v).collect())
    }

    pub fn positive_part(&self) -> Field {
        Field(self.0.iter().map(|&v| v.max(0.0)).collect())
    }

    /// `u⁻ = max(−u, 0)`, a nonnegative field.
    pub fn negative_part(&self) -> Field {
        Field(self.0.iter().map(|&v| (-v).max(0.0)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

#[derive(Debug, Clone)]
enum Stencil {
    /// Uniform Cartesian stencil; `nx × ny` interior nodes (ny = 1 in 1D).
    Cartesian { nx: usize, ny: usize, inv_hx2: f64, inv_hy2: f64 },
    /// Finite-volume radial stencil: `flux[k]` couples unknowns k and k+1
    /// (`flux[n_int-1]` couples the last unknown to the Dirichlet node).
    Radial { flux: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    spacing: [f64; 2],
    /// Quadrature weights at interior nodes (the unknowns).
    weights: Vec<f64>,
    /// Quadrature weights at every node, boundary included.
    node_weights: Vec<f64>,
    stencil: Stencil,
}

fn ball_volume(dim: u32, r: f64) -> f64 {
    match dim {
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => unreachable!("radial dimension validated at construction"),
    }
}

fn sphere_area(dim: u32, r: f64) -> f64 {
    match dim {
        2 => 2.0 * PI * r,
        3 => 4.0 * PI * r * r,
        _ => unreachable!("radial dimension validated at construction"),
    }
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let need = if spec.geometry.is_two_dimensional() { 2 } else { 1 };
        if spec.nodes.len() != need {
            return Err(Error::Config(format!(
                "geometry needs {need} node count(s), got {}",
                spec.nodes.len()
            )));
        }
        if let Some(&n) = spec.nodes.iter().find(|&&n| n < 4) {
            return Err(Error::Config(format!("resolution must be at least 4 nodes per axis, got {n}")));
        }
        match spec.geometry {
            Geometry::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return Err(Error::Config(format!("interval [{a}, {b}] has non-positive length")));
                }
                let n = spec.nodes[0];
                let h = (b - a) / (n - 1) as f64;
                let node_weights = trapezoid_weights(n, h);
                let weights = node_weights[1..n - 1].to_vec();
                Ok(Grid {
                    stencil: Stencil::Cartesian { nx: n - 2, ny: 1, inv_hx2: 1.0 / (h * h), inv_hy2: 0.0 },
                    spec,
                    spacing: [h, 0.0],
                    weights,
                    node_weights,
                })
            }
            Geometry::Rectangle { ax, bx, ay, by } => {
                if !(bx > ax && by > ay) || ![ax, bx, ay, by].iter().all(|v| v.is_finite()) {
                    return Err(Error::Config("rectangle extents must be positive".into()));
                }
                let (nx, ny) = (spec.nodes[0], spec.nodes[1]);
                let hx = (bx - ax) / (nx - 1) as f64;
                let hy = (by - ay) / (ny - 1) as f64;
                let wx = trapezoid_weights(nx, hx);
                let wy = trapezoid_weights(ny, hy);
                let node_weights: Vec<f64> =
                    wy.iter().flat_map(|&y| wx.iter().map(move |&x| x * y)).collect();
                let weights = vec![hx * hy; (nx - 2) * (ny - 2)];
                Ok(Grid {
                    stencil: Stencil::Cartesian {
                        nx: nx - 2,
                        ny: ny - 2,
                        inv_hx2: 1.0 / (hx * hx),
                        inv_hy2: 1.0 / (hy * hy),
                    },
                    spec,
                    spacing: [hx, hy],
                    weights,
                    node_weights,
                })
            }
            Geometry::Radial { dim, r_max } => {
                if !(dim == 2 || dim == 3) {
                    return Err(Error::Config(format!("radial dimension must be 2 or 3, got {dim}")));
                }
                if !(r_max.is_finite() && r_max > 0.0) {
                    return Err(Error::Config(format!("radial truncation radius must be positive, got {r_max}")));
                }
                let n = spec.nodes[0];
                let h = r_max / (n - 1) as f64;
                let node_weights: Vec<f64> = (0..n)
                    .map(|k| {
                        let lo = if k == 0 { 0.0 } else { (k as f64 - 0.5) * h };
                        let hi = if k == n - 1 { r_max } else { (k as f64 + 0.5) * h };
                        ball_volume(dim, hi) - ball_volume(dim, lo)
                    })
                    .collect();
                let weights = node_weights[..n - 1].to_vec();
                let flux = (0..n - 1).map(|k| sphere_area(dim, (k as f64 + 0.5) * h) / h).collect();
                Ok(Grid { stencil: Stencil::Radial { flux }, spec, spacing: [h, 0.0], weights, node_weights })
            }
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Number of unknowns (interior nodes).
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Interior nodes per axis, `[nx, ny]` with `ny = 1` on one-dimensional grids.
    pub fn interior_shape(&self) -> [usize; 2] {
        match &self.stencil {
            Stencil::Cartesian { nx, ny, .. } => [*nx, *ny],
            Stencil::Radial { flux } => [flux.len(), 1],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    /// Measure of the discretized domain.
    pub fn measure(&self) -> f64 {
        match self.spec.geometry {
            Geometry::Interval { a, b } => b - a,
            Geometry::Rectangle { ax, bx, ay, by } => (bx - ax) * (by - ay),
            Geometry::Radial { dim, r_max } => ball_volume(dim, r_max),
        }
    }

    /// Coordinates of interior node `k` (`[x, 0]` in 1D, `[r, 0]` radially).
    pub fn coords(&self, k: usize) -> [f64; 2] {
        match self.spec.geometry {
            Geometry::Interval { a, .. } => [a + (k + 1) as f64 * self.spacing[0], 0.0],
            Geometry::Rectangle { ax, ay, .. } => {
                let nx = self.interior_shape()[0];
                let (ix, iy) = (k % nx, k / nx);
                [ax + (ix + 1) as f64 * self.spacing[0], ay + (iy + 1) as f64 * self.spacing[1]]
            }
            Geometry::Radial { .. } => [k as f64 * self.spacing[0], 0.0],
        }
    }

    /// Total node count including boundary nodes.
    pub fn node_count(&self) -> usize {
        self.node_weights.len()
    }

    /// Coordinates of node `m` of the full grid, boundary included.
    pub fn node_coords(&self, m: usize) -> [f64; 2] {
        match self.spec.geometry {
            Geometry::Interval { a, .. } => [a + m as f64 * self.spacing[0], 0.0],
            Geometry::Rectangle { ax, ay, .. } => {
                let nx = self.spec.nodes[0];
                [ax + (m % nx) as f64 * self.spacing[0], ay + (m / nx) as f64 * self.spacing[1]]
            }
            Geometry::Radial { .. } => [m as f64 * self.spacing[0], 0.0],
        }
    }

    /// Full-grid index of interior node `k`.
    pub fn node_index(&self, k: usize) -> usize {
        match self.spec.geometry {
            Geometry::Interval { .. } => k + 1,
            Geometry::Rectangle { .. } => {
                let nx = self.interior_shape()[0];
                (k / nx + 1) * self.spec.nodes[0] + k % nx + 1
            }
            Geometry::Radial { .. } => k,
        }
    }

    /// Interior index of full-grid node `m`, or `None` on the boundary.
    pub fn interior_index(&self, m: usize) -> Option<usize> {
        match self.spec.geometry {
            Geometry::Interval { .. } => (m >= 1 && m + 1 < self.node_count()).then(|| m - 1),
            Geometry::Rectangle { .. } => {
                let (nx, ny) = (self.spec.nodes[0], self.spec.nodes[1]);
                let (i, j) = (m % nx, m / nx);
                (i >= 1 && i + 1 < nx && j >= 1 && j + 1 < ny).then(|| (j - 1) * (nx - 2) + i - 1)
            }
            Geometry::Radial { .. } => (m + 1 < self.node_count()).then_some(m),
        }
    }

    /// Field of `f` evaluated at interior nodes.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field((0..self.len()).map(|k| f(self.coords(k))).collect())
    }

    pub(crate) fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() == self.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch { expected: self.len(), found: u.len() })
        }
    }

    /// Discrete Laplacian `Δ_h u` with zero boundary values.
    pub fn laplacian(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = vec![0.0; u.len()];
        self.neg_laplacian_into(u, &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(Field(out))
    }

    /// Weighted sum `Σ w_k f_k` over interior nodes.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_slice(f))
    }

    /// Quadrature over every node of the grid, boundary included. `f` is
    /// indexed like [`Grid::node_coords`].
    pub fn integrate_nodal(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.node_count() {
            return Err(Error::GridMismatch { expected: self.node_count(), found: f.len() });
        }
        Ok(f.iter().zip(&self.node_weights).map(|(v, w)| v * w).sum())
    }

    /// `‖u‖²_λ = ∫ |∇u|² + λ u²` in its summation-by-parts form.
    pub fn norm_lambda(&self, u: &Field, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!("λ must be positive, got {lambda}")));
        }
        self.check(u)?;
        Ok(self.dirichlet_form(u) + lambda * self.dot(u, u))
    }

    /// `|u|_4 = (∫ u⁴)^{1/4}`.
    pub fn l4_norm(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self.quartic(u).powf(0.25))
    }

    pub(crate) fn integrate_slice(&self, f: &[f64]) -> f64 {
        ksum(f.iter().zip(&self.weights).map(|(v, w)| v * w))
    }

    pub(crate) fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        ksum(a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w))
    }

    pub(crate) fn quartic(&self, u: &[f64]) -> f64 {
        ksum(u.iter().zip(&self.weights).map(|(v, w)| {
            let s = v * v;
            s * s * w
        }))
    }

    /// `∫ u (−Δ_h u)`.
    pub(crate) fn dirichlet_form(&self, u: &[f64]) -> f64 {
        self.bilinear(u, u)
    }

    /// `∫ u (−Δ_h v)`, symmetric in `u` and `v`, summed edge by edge as
    /// `Σ c_e (u_a − u_b)(v_a − v_b)` so that no stencil cancellation occurs.
    pub(crate) fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        match &self.stencil {
            Stencil::Cartesian { nx, ny, inv_hx2, inv_hy2 } => {
                let (nx, ny) = (*nx, *ny);
                let cell = self.weights[0];
                let at = |f: &[f64], i: isize, j: isize| {
                    if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                        0.0
                    } else {
                        f[j as usize * nx + i as usize]
                    }
                };
                // edge (i-1, i) for i in 0..=nx along x; likewise along y
                let xs = (0..ny).flat_map(|j| (0..=nx).map(move |i| (i as isize, j as isize)));
                let x_part = ksum(xs.map(|(i, j)| {
                    (at(u, i, j) - at(u, i - 1, j)) * (at(v, i, j) - at(v, i - 1, j))
                }));
                let mut total = cell * inv_hx2 * x_part;
                if ny > 1 {
                    let ys = (0..=ny).flat_map(|j| (0..nx).map(move |i| (i as isize, j as isize)));
                    let y_part = ksum(ys.map(|(i, j)| {
                        (at(u, i, j) - at(u, i, j - 1)) * (at(v, i, j) - at(v, i, j - 1))
                    }));
                    total += cell * inv_hy2 * y_part;
                }
                total
            }
            Stencil::Radial { flux } => {
                let n = flux.len();
                let at = |f: &[f64], k: usize| if k < n { f[k] } else { 0.0 };
                ksum((0..n).map(|k| flux[k] * (at(u, k) - at(u, k + 1)) * (at(v, k) - at(v, k + 1))))
            }
        }
    }

    /// `out = −Δ_h u`.
    pub(crate) fn neg_laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        self.stiffness_into(u, out);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
    }

    /// `out = W (−Δ_h) u`, the symmetric stiffness matrix applied to `u`.
    pub(crate) fn stiffness_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.stencil {
            Stencil::Cartesian { nx, ny, inv_hx2, inv_hy2 } => {
                let (nx, ny) = (*nx, *ny);
                let cell = self.weights[0];
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        let c = u[k];
                        let left = if i > 0 { u[k - 1] } else { 0.0 };
                        let right = if i + 1 < nx { u[k + 1] } else { 0.0 };
                        let mut acc = (2.0 * c - left - right) * inv_hx2;
                        if ny > 1 {
                            let down = if j > 0 { u[k - nx] } else { 0.0 };
                            let up = if j + 1 < ny { u[k + nx] } else { 0.0 };
                            acc += (2.0 * c - down - up) * inv_hy2;
                        }
                        out[k] = cell * acc;
                    }
                }
            }
            Stencil::Radial { flux } => {
                let n = flux.len();
                for k in 0..n {
                    let c = u[k];
                    let mut acc = flux[k] * (c - if k + 1 < n { u[k + 1] } else { 0.0 });
                    if k > 0 {
                        acc += flux[k - 1] * (c - u[k - 1]);
                    }
                    out[k] = acc;
                }
            }
        }
    }

    /// Diagonal of the stiffness matrix.
    pub(crate) fn stiffness_diagonal(&self) -> Vec<f64> {
        match &self.stencil {
            Stencil::Cartesian { nx, ny, inv_hx2, inv_hy2 } => {
                let d = self.weights[0] * (2.0 * inv_hx2 + if *ny > 1 { 2.0 * inv_hy2 } else { 0.0 });
                vec![d; nx * ny]
            }
            Stencil::Radial { flux } => {
                (0..flux.len()).map(|k| flux[k] + if k > 0 { flux[k - 1] } else { 0.0 }).collect()
            }
        }
    }

    /// Interior-node neighbours for connectivity: 1D chain, 2D 4-neighbourhood.
    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let [nx, ny] = self.interior_shape();
        let (i, j) = (k % nx, k / nx);
        let cand = [
            (i > 0).then(|| k - 1),
            (i + 1 < nx).then(|| k + 1),
            (j > 0).then(|| k - nx),
            (j + 1 < ny).then(|| k + nx),
        ];
        cand.into_iter().flatten()
    }
}

/// Default truncation radius for the radial whole-space case: twelve decay
/// lengths of the slowest-decaying component.
/// Compensated (Neumaier) summation. The flow compares energies that
/// differ by a few ulps, so plain accumulation is too noisy.
pub(crate) fn ksum(it: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn default_truncation_radius(lambda1: f64, lambda2: f64) -> f64 {
    12.0 / lambda1.min(lambda2).sqrt()
}
