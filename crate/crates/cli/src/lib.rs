//! Config-driven experiments on top of `lognls-core`: TOML configs, atomic
//! output sets, JSON summaries and SVG plots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;

pub use config::{parse_config, ConfigError, ExperimentConfig, Kind, ParsedConfig};
pub use experiment::{run_experiment, CheckResult, RunError, Status, Summary};
pub use plot::{render, PlotSpec, Table};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const NUMERICAL: u8 = 3;
}
