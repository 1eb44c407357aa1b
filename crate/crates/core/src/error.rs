use std::io;

use thiserror::Error;

/// Errors produced anywhere in the simulation or analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("division by zero in {0}")]
    DivisionByZero(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("bad tag file format: {0}")]
    Format(String),

    #[error("corrupt tag file: {0}")]
    Corrupt(String),

    #[error("unsorted tag data at record {offset}: {reason}")]
    Unsorted { offset: u64, reason: String },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the command line front end.
    ///
    /// 2 for configuration and parameter problems, 3 for data problems,
    /// 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config { .. } => 2,
            Error::Precondition(_)
            | Error::DivisionByZero(_)
            | Error::InsufficientData(_)
            | Error::Format(_)
            | Error::Corrupt(_)
            | Error::Unsorted { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
