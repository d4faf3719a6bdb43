//! Distributional reference equations for positive, skewed measurements.
//!
//! Two model families are fitted to the same data: a BCCG GAMLSS with
//! penalised-spline predictors for median, scale and skewness, and a
//! segmented linear regression with two-piece constant variance. The
//! diagnostics module audits their lower-tail calibration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod gamlss;
pub mod pipeline;
pub mod splines;
pub mod slr;
pub mod synthetic;

pub use error::{Error, Result};
