//! Langevin and random-walk Metropolis samplers for Gibbs posteriors.
//!
//! * [`targets`]: potentials, losses, Gibbs posteriors, rescaled potentials.
//! * [`samplers`]: (preconditioned, subgradient) MALA and MRW kernels.
//! * [`estimation`]: empirical risk minimisation and preconditioners.
//! * [`diagnostics`]: Gelman–Rubin shrink factors, effective sample size.
//! * [`conductance`]: brute-force conductance profiles and mixing times of
//!   finite chains.
//! * [`experiments`]: end-to-end studies driven by the command-line tool.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conductance;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod linalg;
pub mod matrix_io;
pub mod samplers;
pub mod targets;

pub use error::{Error, Result};
