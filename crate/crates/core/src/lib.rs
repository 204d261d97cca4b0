//! Reduced-basis solver for optimal control of time-fractional diffusion.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caputo;
pub mod cli;
pub mod error;
pub mod error_bounds;
pub mod fem1d;
pub mod fom;
pub mod linalg;
pub mod problem;
pub mod rb_offline;
pub mod rb_online;

pub use error::{Error, Result};
