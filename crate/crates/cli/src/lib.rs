//! Experiment pipelines on top of `fracnls-core`: configuration, the six
//! commands, and run records with a content hash of their inputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod record;

use std::fmt;

pub use commands::run_command;
pub use config::{Command, ExperimentConfig};
pub use record::{Check, RunRecord};

#[derive(Debug)]
pub enum CliError {
    /// The configuration violates one of the parameter inequalities.
    Config(String),
    /// The computation itself failed.
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fracnls_core::Error> for CliError {
    fn from(e: fracnls_core::Error) -> Self {
        use fracnls_core::Error as E;
        match e {
            E::Config(m) | E::Invalid(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl CliError {
    /// Process exit code: 2 for an invalid configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}
