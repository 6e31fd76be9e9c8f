//! Asynchronous stochastic proximal coordinate descent.
//!
//! The crate is organized bottom-up:
//!
//! * [`objective`] and [`sparse`] describe composite problems `f + Σ Ψ_k`.
//! * [`prox`] holds the per-coordinate proximal step and its certificate.
//! * [`lipschitz`] computes coordinate smoothness parameters and the
//!   admissible overlap bound.
//! * [`seq_solver`] is the sequential baseline and rate formulas.
//! * [`async_sim`] replays asynchronous executions deterministically and
//!   checks the per-update progress inequalities.
//! * [`parallel_rt`] runs the algorithm on real threads.
//! * [`harness`] generates problems and drives experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod async_sim;
pub mod error;
pub mod harness;
pub mod lipschitz;
pub mod objective;
pub mod parallel_rt;
pub mod prox;
pub mod rng;
pub mod seq_solver;
pub mod sparse;

pub use error::{Error, Result};
pub use lipschitz::LipschitzProfile;
pub use objective::{ProblemInstance, Regularizer, SmoothPart};
pub use prox::StepContext;
pub use seq_solver::{SolverConfig, Trace, UpdateRecord};
pub use sparse::CsrMatrix;
