//! Command-line companion to `patience-core`: file formats, configuration,
//! JSON output schema, parallel runners, and the subcommand implementations.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod output;
pub mod parallel;
