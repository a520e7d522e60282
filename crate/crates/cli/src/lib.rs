//! Configuration, verification suites and subcommands of the `hornspde`
//! command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod output;
pub mod suites;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use output::{Check, RunManifest};
pub use suites::{Suite, SuiteReport};
