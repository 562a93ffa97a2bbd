//! Configuration-driven experiments for the stiga solver.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod sources;

pub use error::CliError;
