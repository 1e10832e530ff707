//! Configuration, experiment registry and result emission for the
//! `lonelywalks` command.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod registry;

pub use config::{ConfigError, ExperimentConfig};
pub use output::{Gate, Outcome, ResultRow};
