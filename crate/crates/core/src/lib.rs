//! Optimal-fidelity multi-level Monte Carlo.
//!
//! The crate estimates expectations of quantities of interest computed by a
//! hierarchy of increasingly accurate and expensive models. Each telescoping
//! correction carries a control-variate coefficient chosen to minimize the
//! work-weighted variance, and samples are allocated adaptively to reach a
//! tolerance or spend a budget.
//!
//! * [`levels`] describes the hierarchy and the warm-up allocation.
//! * [`estimator`] holds the pure numerics: indicators, coefficients, errors
//!   and allocations.
//! * [`models`] defines the [`models::Model`] trait and the built-in models.
//! * [`scheduler`] executes samples on a worker pool and persists them.
//! * [`controller`] drives the adaptive campaign loop.
//! * [`statistics`] post-processes stored samples.
//! * [`cli`] runs, resumes and reports campaigns kept on disk.

pub mod cli;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod levels;
pub mod models;
pub mod rng;
pub mod scheduler;
pub mod statistics;

pub use error::{Error, Result};
