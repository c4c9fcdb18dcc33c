//! Library half of the `heatlab` binary: configuration, on-disk formats and
//! the subcommand implementations, so tests can drive them in-process.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
