//! Library half of the `brokenpde` command-line tool: config parsing, file
//! output, the subcommand implementations and the verification suite.
//!
//! Exit-code contract of the binary:
//!
//! * `0` success
//! * `2` configuration error (malformed file, unknown or invalid keys)
//! * `3` numerical non-convergence (reports are still written)
//! * `4` verification failure (`verify` only)
//! * `1` anything else (I/O, ...)

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] config::ConfigError),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("{failed} of {total} criteria failed")]
    Acceptance { failed: usize, total: usize },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Acceptance { .. } => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}
