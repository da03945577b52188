//! Command-line layer: file formats, the toy story pipeline, commands, run
//! manifests and SVG reports.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod report;
pub mod story;

use clap::Parser;

pub use commands::Command;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "idforge", version, about = "Identity discovery and identity injection on synthetic data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}
