//! Homogeneous multilinear sums `Q_d(N, f, X)`: kernel calculus, contraction
//! norms, explicit normal and chi-square approximation bounds, and a seeded
//! Monte Carlo harness for universality experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod contraction;
pub mod diagnose;
pub mod error;
pub mod kernel;
pub mod moments;
pub mod numeric;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
pub use kernel::SymmetricKernel;
