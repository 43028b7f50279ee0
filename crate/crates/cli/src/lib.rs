//! Configuration, pipeline runner and deterministic report writers behind
//! the `ebk` command.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{RunConfig, Stage, StagePlan};
pub use error::CliError;
pub use run::{run, Check, Manifest};
