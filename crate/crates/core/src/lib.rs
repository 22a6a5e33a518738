//! Two-sided fairness benchmarking for point-of-interest recommendation.
//!
//! The crate covers the whole evaluation chain: check-in ingestion and temporal splitting
//! ([`dataset`]), popularity and activity analysis ([`profiling`]), collaborative models
//! ([`recommenders`]), geographic/social/sequential scorers ([`contextual`]) and the
//! accuracy and fairness measures ([`metrics`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contextual;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod profiling;
pub mod recommenders;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
