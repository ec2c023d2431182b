//! Run configuration: a TOML file with `[grid]`, `[params]`, `[seed]`,
//! `[solve]`, `[sweep]` and `[output]` sections.

use std::path::{Path, PathBuf};

use nodal_core::flow::{SeedKind, SolveOptions};
use nodal_core::grid::default_truncation_radius;
use nodal_core::analysis::SeedPolicy;
use nodal_core::{Grid, GridSpec, Mode, Params, Problem};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Overrides the root that relative output directories are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "NODAL_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Interval,
    Rectangle,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub geometry: GeometryKind,
    /// Nodes per axis, boundary included.
    pub nodes: Vec<usize>,
    /// `[a, b]` or `[ax, bx, ay, by]`; defaults to the unit interval or square.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn sign_changing() -> Mode {
    Mode::SignChanging
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default = "one")]
    pub lambda1: f64,
    #[serde(default = "one")]
    pub lambda2: f64,
    #[serde(default = "one")]
    pub mu1: f64,
    #[serde(default = "one")]
    pub mu2: f64,
    pub beta: f64,
    #[serde(default = "sign_changing")]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedFamily {
    DisjointBumps,
    RandomBalanced,
    SemiNodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub kind: SeedFamily,
    pub k1: usize,
    pub k2: usize,
    pub rng_seed: u64,
    /// Number of runs; run `m` uses `rng_seed + m`.
    pub count: usize,
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection { kind: SeedFamily::DisjointBumps, k1: 2, k2: 2, rng_seed: 0, count: 1 }
    }
}

impl SeedSection {
    pub fn kind(&self) -> SeedKind {
        match self.kind {
            SeedFamily::DisjointBumps => SeedKind::DisjointBumps { k1: self.k1, k2: self.k2 },
            SeedFamily::RandomBalanced => SeedKind::RandomBalanced,
            SeedFamily::SemiNodal => SeedKind::SemiNodal { k1: self.k1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub betas: Vec<f64>,
    #[serde(default)]
    pub policy: SeedPolicy,
    /// Support threshold for the endpoint structure checks.
    #[serde(default = "support_tol")]
    pub support_tol: f64,
}

fn support_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub trace: bool,
    pub workers: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("runs"), trace: true, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub seed: SeedSection,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// The sections that determine results; `[output]` is excluded.
#[derive(Serialize)]
struct Hashed<'a> {
    grid: &'a GridSection,
    params: &'a ParamsSection,
    seed: &'a SeedSection,
    solve: &'a SolveOptions,
    sweep: &'a Option<SweepSection>,
}

impl RunConfig {
    pub fn params(&self) -> Params {
        let p = &self.params;
        Params { lambda1: p.lambda1, lambda2: p.lambda2, mu1: p.mu1, mu2: p.mu2, beta: p.beta, mode: p.mode }
    }

    pub fn grid_spec(&self) -> GridSpec {
        let g = &self.grid;
        let e = g.extent.clone().unwrap_or_default();
        match g.geometry {
            GeometryKind::Interval => GridSpec::interval(e[0], e[1], g.nodes[0]),
            GeometryKind::Rectangle => {
                GridSpec::rectangle(e[0], e[1], e[2], e[3], g.nodes[0], *g.nodes.get(1).unwrap_or(&0))
            }
            GeometryKind::Radial => GridSpec::radial(g.dim.unwrap_or(3), g.r_max.unwrap_or(0.0), g.nodes[0]),
        }
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let grid = Grid::new(self.grid_spec()).map_err(|e| CliError::usage(e.to_string()))?;
        Problem::new(grid, self.params()).map_err(|e| CliError::usage(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form of the result-determining sections.
    pub fn hash(&self) -> String {
        let h = Hashed {
            grid: &self.grid,
            params: &self.params,
            seed: &self.seed,
            solve: &self.solve,
            sweep: &self.sweep,
        };
        let bytes = serde_json::to_vec(&h).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Output directory, resolved against the override root if set.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output.dir.is_relative() => PathBuf::from(root).join(&self.output.dir),
            _ => self.output.dir.clone(),
        }
    }
}

/// Line of `key` inside `[section]`, one-based.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    for (i, line) in src.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Reporter<'a> {
    src: &'a str,
    origin: &'a str,
}

impl Reporter<'_> {
    fn fail(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        let at = match locate(self.src, section, key).or_else(|| locate_header(self.src, section)) {
            Some(line) => format!("{}:{line}", self.origin),
            None => self.origin.to_string(),
        };
        CliError::usage(format!("{at}: [{section}] {key}: {msg}"))
    }
}

fn locate_header(src: &str, section: &str) -> Option<usize> {
    src.lines().position(|l| l.trim() == format!("[{section}]")).map(|i| i + 1)
}

/// Which of `keys` a core validation message is about.
fn key_in<'k>(msg: &str, keys: &[&'k str]) -> &'k str {
    keys.iter().find(|k| msg.contains(*k)).copied().unwrap_or(keys[0])
}

pub fn parse(src: &str, origin: &str) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
        let at = line.map_or(origin.to_string(), |l| format!("{origin}:{l}"));
        CliError::usage(format!("{at}: {}", e.message()))
    })?;
    let r = Reporter { src, origin };

    let p = cfg.params();
    if let Err(e) = p.validate() {
        let msg = e.to_string();
        return Err(r.fail("params", key_in(&msg, &["beta", "lambda1", "lambda2", "mu1", "mu2"]), msg));
    }

    let g = &mut cfg.grid;
    let (axes, default_extent) = match g.geometry {
        GeometryKind::Interval => (1, vec![0.0, 1.0]),
        GeometryKind::Rectangle => (2, vec![0.0, 1.0, 0.0, 1.0]),
        GeometryKind::Radial => (1, vec![]),
    };
    if g.nodes.len() != axes {
        return Err(r.fail("grid", "nodes", format!("{:?} geometry needs {axes} node count(s)", g.geometry)));
    }
    if g.geometry == GeometryKind::Radial {
        if g.extent.is_some() {
            return Err(r.fail("grid", "extent", "radial grids take r_max instead"));
        }
        g.dim.get_or_insert(3);
        g.r_max.get_or_insert(default_truncation_radius(p.lambda1, p.lambda2));
    } else {
        if g.dim.is_some() || g.r_max.is_some() {
            return Err(r.fail("grid", if g.dim.is_some() { "dim" } else { "r_max" }, "only radial grids take this key"));
        }
        let e = g.extent.get_or_insert(default_extent);
        if e.len() != 2 * axes {
            return Err(r.fail("grid", "extent", format!("expected {} numbers, got {}", 2 * axes, e.len())));
        }
    }
    if let Err(e) = Grid::new(cfg.grid_spec()) {
        let msg = e.to_string();
        let key = if msg.contains("node") || msg.contains("resolution") {
            "nodes"
        } else if msg.contains("dimension") {
            "dim"
        } else if msg.contains("radius") {
            "r_max"
        } else {
            "extent"
        };
        return Err(r.fail("grid", key, msg));
    }

    let s = &cfg.seed;
    match s.kind {
        SeedFamily::DisjointBumps if s.k1 < 2 || s.k2 < 2 => {
            return Err(r.fail("seed", if s.k1 < 2 { "k1" } else { "k2" }, "bump counts must be at least 2"));
        }
        SeedFamily::SemiNodal if s.k1 < 2 => return Err(r.fail("seed", "k1", "must be at least 2")),
        _ => {}
    }
    if s.count == 0 {
        return Err(r.fail("seed", "count", "must be at least 1"));
    }

    if let Err(e) = cfg.solve.validate() {
        let msg = e.to_string();
        let key = if msg.contains("time steps") {
            "dt_init"
        } else {
            key_in(&msg, &["v_tol", "max_steps", "delta", "armijo_c", "tol_lin"])
        };
        return Err(r.fail("solve", key, msg));
    }

    if let Some(sw) = &cfg.sweep {
        if sw.betas.is_empty() {
            return Err(r.fail("sweep", "betas", "needs at least one coupling value"));
        }
        if sw.betas.iter().any(|b| !(*b < 0.0)) || sw.betas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(r.fail("sweep", "betas", "couplings must be negative and strictly decreasing"));
        }
        if !(sw.support_tol > 0.0 && sw.support_tol < 1.0) {
            return Err(r.fail("sweep", "support_tol", "must lie in (0, 1)"));
        }
    }
    if cfg.output.workers == 0 {
        return Err(r.fail("output", "workers", "must be at least 1"));
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: cannot read config: {e}", path.display())))?;
    parse(&src, &path.display().to_string())
}
