//! Constrained saddle-point dynamics and distributed networked optimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`sets`]: closed convex sets with exact Euclidean projection.
//! - [`problem`]: the saddle problem `min_x max_y f(x, y)` over `X × Y`, its
//!   gradient operator `F(z) = col(∇ₓf, −∇ᵧf)` and sampled property checks.
//! - [`solvers`]: the projected GDA / OGDA / EG iterations behind a common
//!   [`solvers::SaddleMethod`] trait, looked up by name in a
//!   [`solvers::MethodRegistry`], plus the run loop, traces and diagnostics.
//! - [`graph`]: undirected connected communication graphs.
//! - [`network`]: a bulk-synchronous message-passing simulator.
//! - [`consensus`] and [`allocation`]: the two networked problems, their
//!   Lagrangians and per-agent update rules.
//! - [`oracle`]: independent reference solvers used as ground truth.
//! - [`catalog`]: seeded experiment instances and small closed-form families.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod catalog;
pub mod consensus;
mod error;
pub mod graph;
pub mod linalg;
pub mod network;
pub mod objectives;
pub mod oracle;
pub mod problem;
pub mod rng;
pub mod sets;
pub mod solvers;

pub use error::{Error, Result};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for problem data (`B`, `W_i`, Laplacians).
pub type Matrix = nalgebra::DMatrix<f64>;
