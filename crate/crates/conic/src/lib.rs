//! Second-order cone programming toolkit.
//!
//! The crate has three layers:
//!
//! * [`ConicProgram`] / [`MixedConicProgram`]: a flat standard form with a linear
//!   objective, linear equalities and `<=` rows, variable bounds and cones placed
//!   over variable indices.
//! * [`solve_socp`]: a homogeneous self-dual interior-point method with
//!   Nesterov-Todd scaling and Mehrotra correction. Newton systems are solved with
//!   a sparse quasi-definite LDLᵀ factorization.
//! * [`branch_and_bound`]: best-first search over the declared binary variables.
//!
//! [`Model`] is a small modeling layer on top that accepts affine cone members and
//! lowers them onto auxiliary variables.

mod bnb;
mod cones;
mod ipm;
mod linalg;
mod model;
mod program;
pub mod text;

pub use bnb::{branch_and_bound, BnbResult, BnbSettings, BnbStatus};
pub use ipm::{check_residuals, solve_socp, Duals, Residuals, Settings, Solution, Status};
pub use model::{LinExpr, Model, Var};
pub use program::{Cone, ConicProgram, LinearRow, MixedConicProgram, ProgramError};
