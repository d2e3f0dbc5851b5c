//! Library half of the `maestro` command-line runner. The binary is a thin
//! clap dispatcher over these modules, which keeps every command testable
//! in-process.
//!
//! Exit-code contract: 0 ok, 1 generic failure (e.g. an acceptance check
//! that simply did not hold), 2 configuration error, 3 missing artifact,
//! 4 data error.

pub mod artifacts;
pub mod config;
pub mod evalcmd;
pub mod eventlog;
pub mod landscape;
pub mod plot;
pub mod runner;
pub mod table1;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// A referenced artifact (checkpoint, fixture, directory) is absent (exit 3).
    #[error("missing artifact: {0}")]
    Missing(String),
    /// An artifact exists but its contents are unusable (exit 4).
    #[error("data error: {0}")]
    Data(String),
    /// Everything else: I/O failures, internal engine errors (exit 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> CliError {
        CliError::Internal(e.to_string())
    }
}

/// Wraps `std::io` errors: a not-found on a user-named path is a missing
/// artifact; anything else is internal.
pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::Missing(format!("{}: {e}", path.display()))
    } else {
        CliError::Internal(format!("{}: {e}", path.display()))
    }
}
