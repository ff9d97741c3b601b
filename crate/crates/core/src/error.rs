use thiserror::Error;

/// Errors raised by the simulator, learner and evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible power request: {requested_w} W exceeds the deliverable limit {limit_w} W")]
    InfeasiblePower { requested_w: f64, limit_w: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("environment state error: {0}")]
    State(String),

    #[error("{path}: row {row}: {message}")]
    Load {
        path: String,
        row: usize,
        message: String,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by user input (bad config, bad data files)
    /// rather than by a failure inside the library.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config(_) | Error::Load { .. } | Error::Checkpoint(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
