//! Experiment orchestration for the `ethlab` binary: configuration, cached
//! environment decompositions, resumable run manifests and the subcommands.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;

pub use config::ExperimentConfig;
pub use error::CliError;
