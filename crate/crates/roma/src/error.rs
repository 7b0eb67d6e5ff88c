//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, configuration, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A value or combination of values in a config is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A detection trace does not cover a frame the simulator needs.
    #[error("detector {detector} has no trace data for frame {frame}")]
    MissingFrame { detector: usize, frame: usize },

    /// Evaluation inputs do not line up (e.g. ground truth extends past the run).
    #[error("evaluation mismatch: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
