//! Hybrid physics/neural-network variational data assimilation.
//!
//! A physical forecast model is supplemented by a column neural network that
//! predicts a constant model-error forcing for each assimilation window. The
//! network is pre-trained offline on analysis increments and then trained
//! online by including its parameters in the control vector of an incremental
//! 4D-Var minimization.

// Index loops mirror the stencil formulas; `!(x > 0.0)` rejects NaN too.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod parallel;
pub mod sphere;

pub use error::{HdaError, Result};
pub mod io;
pub mod net;
pub mod dynamics;
pub mod assim;
pub mod dataset;
pub mod diag;
pub mod experiment;
