//! Configuration, cached pipeline, report emission and the `poifair` command line.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod emit;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod synth;

pub use config::{load_config, parse_config, ExperimentConfig, LoadedConfig};
pub use emit::emit_report;
pub use error::{HarnessError, Result};
pub use pipeline::{Pipeline, RunManifest, RunReport};
