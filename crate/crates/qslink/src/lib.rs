//! Monte-Carlo oracle, file formats and command-line experiments built on
//! `qslink-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod montecarlo;

pub use error::{Error, Result};
