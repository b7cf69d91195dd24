//! Hardy inequalities for the p-Laplacian with Robin boundary conditions.
//!
//! The crate computes the Robin Hardy weight `(delta + alpha)^(-p)`,
//! discretises the quotient
//! `(int |grad u|^p + int_boundary sigma |u|^p) / int (delta + alpha)^(-p) |u|^p`
//! with piecewise-linear elements, minimises it, and compares the result
//! against closed-form lower and upper bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exterior;
pub mod functional;
pub mod geometry;
pub mod mesh;
pub mod oracles;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod weights;

pub use error::{HardyError, Result};
pub use exterior::ExteriorProblem;
pub use functional::{Discretization, Field, Reduction};
pub use geometry::{Domain, Projection};
pub use mesh::{Mesh, Mesh1D, MeshSummary, RadialLogMesh, TriMesh};
pub use solver::{
    minimize_quotient, minimizing_sequence, multi_start, Init, MultiStart, QuotientProblem, QuotientReport,
    SolverConfig,
};
pub use weights::{alpha_at, cp_constant, weight_at, BoundaryPartition, Condition, HardyWeight};
