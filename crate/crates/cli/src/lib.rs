//! Batch front end for the charflow core: parse a TOML run configuration,
//! execute one task, write CSV artifacts plus a plain-text report.
//!
//! Exposed as a library so the binary stays a thin wrapper and integration
//! tests can drive runs in-process.

pub mod config;
pub mod runner;

pub use config::{parse_config, RunConfig, Task};
pub use runner::{run, Overrides, RunSummary};
