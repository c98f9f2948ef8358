//! The `dqn` harness: layered configuration, CSV schemas and subcommands.

pub mod commands;
pub mod config;
pub mod schema;
