//! Finite-blocklength reliability and energy-efficiency analysis for a
//! UAV decode-and-forward relay serving a fluid-antenna receiver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blercore;
pub mod chanmodel;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod mcoracle;
pub mod optimizer;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
