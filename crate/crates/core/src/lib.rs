//! Balanced primal-dual splitting for
//!
//! ```text
//! minimize f(x) + r(Bx)   subject to   Dx = d
//! ```
//!
//! where `f` is convex with a Lipschitz gradient and `r` has a cheap proximal
//! map. The problem is lifted to `X = (x, y)` with the constraint `Bx = y`,
//! and solved by a primal prox step, a dual step in the metric
//! `Q = (1/gamma) I + alpha D D^T`, and a correction step. The stepsize
//! condition `0 < alpha < 2/L` does not involve `B` or `D`.
//!
//! The crate is `no_std` with `alloc`; anything touching files or clocks lives
//! in the `balpa-bench` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod distributed;
pub mod error;
pub mod generators;
pub mod kkt;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod prox;
pub mod rates;
pub mod smooth;
pub mod solvers;
pub mod stochastic;

pub use error::{Error, Result};
pub use linalg::{CsrMatrix, Matrix};
pub use operator::{LinearOperator, NormEstimate};
pub use problem::{lift_problem, CompositeProblem, LiftedProblem};
pub use prox::ProxTerm;
pub use smooth::SmoothFunction;
