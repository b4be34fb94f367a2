use std::path::PathBuf;

use thiserror::Error;

use crate::planner::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no clay observed inside the workspace bounds")]
    NoClayObserved,

    #[error("planning failure: unsupported cells {cells:?}")]
    PlanningFailure { cells: Vec<Cell> },

    #[error("unknown shape {prompt:?}; known templates: {}", known.join(", "))]
    UnknownShape { prompt: String, known: Vec<String> },

    #[error("backend transport error: {0}")]
    Transport(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status for this error: 2 planning, 3 transport, 4 config,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PlanningFailure { .. } | Error::UnknownShape { .. } => 2,
            Error::Transport(_) => 3,
            Error::Config(_) => 4,
            _ => 1,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidState(_) => "invalid-state",
            Error::NoClayObserved => "no-clay-observed",
            Error::PlanningFailure { .. } => "planning-failure",
            Error::UnknownShape { .. } => "unknown-shape",
            Error::Transport(_) => "transport",
            Error::UndefinedStatistic(_) => "undefined-statistic",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
