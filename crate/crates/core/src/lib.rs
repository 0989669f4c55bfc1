//! Sparse least-squares regression under order constraints on magnitudes.
//!
//! Problems take the form
//!
//! ```text
//! min_x  f(x) + λ Σ ψ(|x_i|)   subject to  |x| ∈ Ω
//! ```
//!
//! with `f` a scaled least-squares loss, `ψ` one of the penalties in
//! [`regularizer`], and `Ω` the nonnegative orthant or a (block) isotone cone.
//! [`solver::dma`] implements the doubly majorized algorithm, which works in
//! the coordinates `v = ψ(|x|)` and only needs projections onto `Ω`.
//! [`solver::npg`] provides proximal gradient baselines for the models whose
//! proximal maps are available in closed form.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraint;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod io;
pub mod problem;
pub mod prox;
pub mod regularizer;
pub mod solver;

pub use constraint::{ConstraintKind, ConstraintSet};
pub use error::{Error, Result};
pub use problem::{LeastSquares, Problem};
pub use regularizer::{ExtendedReal, Family, Regularizer};
pub use solver::dma::{dma_solve, DmaSolver};
pub use solver::npg::{npg_solve, NpgSolver, ProxSpec};
pub use solver::{EtaRule, RunResult, SolverConfig, Termination};
