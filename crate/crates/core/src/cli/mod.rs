//! Command-line layer: run configuration, subcommands, synthetic data and
//! benchmarks.

pub mod bench;
pub mod commands;
pub mod config;
pub mod synth;

pub use commands::run;
pub use config::{Format, RunConfig};
