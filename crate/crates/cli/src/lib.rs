//! Command-line orchestration of the detection pipeline and the validation
//! experiment: `synth`, `detect`, `validate` and `report`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use args::{run, Cli};
pub use config::PipelineConfig;
pub use error::CliError;
