//! Experiment orchestration: configuration, the four experiments, result
//! files and the command-line front end.

mod cli;
mod config;
mod experiments;
mod output;

pub use cli::{cli_main, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, THREADS_ENV};
pub use config::*;
pub use experiments::*;
pub use output::*;
