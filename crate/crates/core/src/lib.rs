//! Sign-changing and semi-nodal solutions of a repulsive coupled cubic
//! Schrödinger system, computed by a projected descent flow.

pub mod analysis;
pub mod error;
pub mod functional;
pub mod grid;
pub mod koperator;
pub mod nehari;
pub mod flow;

pub use error::{Error, Result};
pub use functional::{ConeComponents, FieldPair, Membership, Mode, Params, Problem, TScalars};
pub use grid::{Field, Geometry, Grid, GridSpec};
