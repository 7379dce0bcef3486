use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("could only place {placed} of {requested} small cells after {retries} retries")]
    Placement {
        placed: usize,
        requested: usize,
        retries: usize,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("generator for flow {flow_id} polled at TTI {got} after TTI {last}")]
    NonMonotoneTti { flow_id: usize, last: u64, got: u64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum RlError {
    #[error("expected input of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient encountered")]
    NonFiniteGradient,
    #[error("action index {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SteeringError {
    #[error("extrinsic reward requested for an empty goal epoch")]
    EmptyEpoch,
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// Top-level error surfaced by the harness and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Steering(#[from] SteeringError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl From<RlError> for Error {
    fn from(e: RlError) -> Self {
        Error::Steering(SteeringError::Rl(e))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for configuration problems, 2 for everything that
    /// went wrong at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
