//! Command-line driver for `gmn-core`: model files, grid evaluation,
//! certificate runs and data export.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
