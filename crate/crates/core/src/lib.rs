//! Week-ahead hourly electricity price forecasting.
//!
//! The forecasting pipeline combines a Kolmogorov-Arnold network and a
//! gradient-boosted tree ensemble through a validation-tuned convex weight,
//! and evaluates it with an expanding-window backtest.

// `!(a > b)` is used deliberately so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod gbt;
pub mod kan;
pub mod pipeline;
pub mod synth;
pub mod timeseries;

pub use error::{Error, ErrorCategory, Result};
