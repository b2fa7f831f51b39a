use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the object it is applied to.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller broke a documented precondition (shape, convention, sign).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A division by an at-risk value or `1 - ΔΛ` that is zero.
    #[error("singularity at time {time}: {what}")]
    Singularity { time: f64, what: String },

    #[error("jump too close to -1 at {time}: jump = {jump}")]
    JumpTooClose { time: f64, jump: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach context (e.g. the dataset seed or sequence index) to an error.
    pub fn context(self, ctx: impl std::fmt::Display) -> Error {
        match self {
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Contract(m) => Error::Contract(format!("{ctx}: {m}")),
            Error::Singularity { time, what } => Error::Singularity {
                time,
                what: format!("{ctx}: {what}"),
            },
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Parse(m) => Error::Parse(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// True for errors caused by the data or numerics rather than by usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
