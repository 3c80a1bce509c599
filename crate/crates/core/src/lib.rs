//! Coordinated beamforming for dense cooperative networks.
//!
//! The max-min fair rate problem is solved by bisection over a common rate
//! target. Each feasibility subproblem is a second-order cone program whose
//! structure depends only on the network size, so its standard form is
//! generated once ([`template::build_template`]) and refreshed per
//! realization by copying parameters ([`template::stuff`]). The cone program
//! is solved by operator splitting on the homogeneous self-dual embedding
//! ([`hsd`]), which also yields infeasibility certificates.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod beamforming;
pub mod cones;
pub mod embed;
pub mod error;
pub mod hsd;
pub mod linsys;
pub mod problem;
pub mod sparse;
pub mod template;

pub use cones::{ConeFactor, ConeKind, ConeProduct};
pub use error::{Error, Result};
pub use hsd::{HsdSolver, SolveResult, SolverSettings, Status};
pub use linsys::LinSolve;
pub use problem::{compute_dims, ConicProblem, FieldMode, ProblemDims};
pub use template::{build_from_scratch, build_template, stuff, StuffParams, StuffingTemplate};
