//! Spline and neural regression for monthly series forecasting.
//!
//! The crate has four parts:
//!
//! - [`mars`]: adaptive regression splines built from hinge basis functions,
//!   fitted by greedy forward selection and GCV-guided backward pruning.
//! - [`neural`]: a small feedforward network with batch backpropagation and
//!   three trainers (gradient descent with momentum, conjugate gradient with
//!   line search, scaled conjugate gradient without one).
//! - [`timeseries`]: CSV ingestion, train-only standardization, lag embedding,
//!   chronological splitting, and a synthetic monsoon-like series generator.
//! - [`bench`]: the end-to-end benchmark pipeline behind the `rainbench` CLI.
//!
//! With the default `parallel` feature the hot loops (candidate-knot scans,
//! batch gradient accumulation) run on rayon. Every parallel loop materializes
//! its results in index order before combining them, so output is
//! bit-identical across thread counts and matches the sequential fallback.

pub mod bench;
pub mod error;
mod exec;
pub mod linalg;
pub mod mars;
pub mod neural;
pub mod timeseries;

pub use error::{Error, Result};
pub use linalg::{least_squares_fit, LeastSquaresFit, Matrix};
