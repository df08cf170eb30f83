//! Rigid slider on a cavitating lubricant film.
//!
//! The film pressure solves a Reynolds obstacle problem at each instant;
//! its integral drives the slider height through Newton's law. The crate
//! provides the discretization and solvers, the coupled time integration,
//! stationary states, the a priori bounds and independent reference
//! computations for testing.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
mod error;
pub mod geometry;
pub mod oracle;
pub mod steady;
pub mod vi;

pub use error::{Error, Result};
