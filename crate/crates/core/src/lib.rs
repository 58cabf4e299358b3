//! Epsilon-monotone Fourier timestepping for option pricing and
//! multiperiod mean-variance asset allocation under jump diffusions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contracts;
pub mod error;
pub mod grid;
pub mod meanvar;
pub mod models;
pub mod projection;
pub mod report;
pub mod stepping;

pub use error::{Error, Result};
