//! Batch front-end for `llcorr`: configuration, sweeps, figure data, caching and the acceptance suite.

pub mod acceptance;
pub mod args;
pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod plot;
pub mod sweep;

pub use error::{CliError, Result};
