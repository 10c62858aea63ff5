//! Experiment configuration, orchestration and the command-line surface.

pub mod cli;
mod config;
mod experiment;
mod studies;

pub use config::*;
pub use experiment::*;
pub use studies::*;
