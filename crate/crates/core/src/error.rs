use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("epsilon parameterization undefined at timestep {timestep} (alpha_bar = 0); use the v-prediction path")]
    Parameterization { timestep: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("condition id {id} outside vocabulary of size {size}")]
    Vocabulary { id: usize, size: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("word error rate undefined for an empty reference")]
    UndefinedWer,

    #[error("target {target} unreachable; the curve levels off at {asymptote}")]
    Unreachable { target: f64, asymptote: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Whether the error stems from invalid input rather than a failure
    /// while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Schedule(_)
                | Error::Shape { .. }
                | Error::Vocabulary { .. }
                | Error::EmptyBatch
                | Error::InsufficientData { .. }
                | Error::UndefinedWer
                | Error::Data(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Config(_)
        )
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
