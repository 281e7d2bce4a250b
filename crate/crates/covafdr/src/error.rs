//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by parsing, configuration, and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (bad rows, duplicate ids, out-of-range values).
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// Invalid parameters or incompatible artifacts.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid runtime input to an operation (non-finite values, id mismatches).
    #[error("input error: {0}")]
    Input(String),

    /// Numerical failure (factorization breakdown, diverged fit).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(row: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            row,
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code for the CLI: 2 for data problems, 3 for
    /// configuration/artifact problems, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Input(_) => 2,
            Error::Config(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
