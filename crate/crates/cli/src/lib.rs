//! Subcommands of the `novelword` pipeline, usable as a library.
//!
//! Every stage writes into `<output_dir>/<stage>/` along with a
//! `manifest.json` holding content hashes of its inputs and outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod fixture;
pub mod output;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
