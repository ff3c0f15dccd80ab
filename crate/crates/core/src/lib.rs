//! Desk-scale laboratory for lazy (linearized) versus feature-learning
//! training of small networks.
//!
//! - [`nn`]: MLP engine with α-scaled training.
//! - [`probes`]: sign similarity, tangent-kernel and representation alignment.
//! - [`quadratic`]: the solvable quadratic model, closed forms and ODE oracles.
//! - [`data`]: synthetic datasets, label noise, difficulty grouping, C-scores.
//! - [`harness`]: paired runs, grouped traces, progress alignment, Δloss maps.

pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod probes;
pub mod quadratic;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
