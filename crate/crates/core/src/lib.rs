//! Multi-leader multi-follower games with a shared follower equilibrium.
//!
//! Leaders `i = 1..N` choose `x_i` in boxes `X_i` and minimize
//! `φ_i(x) + h(x, y_i)`, where each `y_i` must solve the follower's
//! variational inequality VI(G(x, ·), K(x)). For quasi-potential games the
//! equilibria are found by minimizing `π(x) + h(x, w)` over `w ∈ S(x)`; the
//! [`verify`] module certifies candidates independently of that reduction.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common double-precision types.

// `!(a <= b)` is used on purpose so that NaN counts as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity, clippy::too_many_arguments)]

pub mod cli;
pub mod expr;
pub mod model;
pub mod potential;
pub mod scalar;
mod search;
pub mod solvers;
pub mod verify;
pub mod vi;

pub use scalar::Scalar;

pub type Expr64 = expr::Expr<f64>;
pub type Expr32 = expr::Expr<f32>;
pub type Game64 = model::GameInstance<f64>;
pub type Game32 = model::GameInstance<f32>;
pub type SolutionSet64 = vi::SolutionSet<f64>;
pub type SolutionSet32 = vi::SolutionSet<f32>;
pub type SolveReport64 = solvers::SolveReport<f64>;
pub type SolveReport32 = solvers::SolveReport<f32>;
pub type VerificationReport64 = verify::VerificationReport<f64>;
pub type VerificationReport32 = verify::VerificationReport<f32>;
