//! Optimized pre-processing of categorical data for discrimination control.
//!
//! A randomized transform of features and outcome is fitted by convex
//! optimization so that group outcome rates stay within a tolerance while the
//! transformed distribution stays close to the original and individual
//! records are not distorted beyond a budget.

// NaN must fail the parameter checks, which negated comparisons give for free
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audit;
pub mod constraints;
pub mod domain;
pub mod optimizer;
pub mod pipeline;
pub mod transform;
mod error;

pub use error::{Error, Result};
