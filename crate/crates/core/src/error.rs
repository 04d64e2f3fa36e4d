use thiserror::Error;

/// Errors raised by the estimators, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("measurement vector has zero norm")]
    ZeroInput,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// The active-set search of the ball projection found no index.
    /// Only reachable when the ball invariants are broken.
    #[error("ball projection found no active coordinate (radius {delta})")]
    NoActiveCoordinate { delta: f64 },

    #[error("brute-force oracle limited to {max} coordinates, got {found}")]
    OracleTooLarge { max: usize, found: usize },

    #[error("every trial of `{0}` was invalid")]
    AllTrialsInvalid(String),

    #[error("evaluation iteration {iteration} outside 1..={n_iters}")]
    EvalOutOfRange { iteration: usize, n_iters: usize },

    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroInput => "zero_input",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NonFinite(_) => "non_finite",
            Error::Empty(_) => "empty",
            Error::NoActiveCoordinate { .. } => "no_active_coordinate",
            Error::OracleTooLarge { .. } => "oracle_too_large",
            Error::AllTrialsInvalid(_) => "all_trials_invalid",
            Error::EvalOutOfRange { .. } => "eval_out_of_range",
            Error::ConfigParse(_) | Error::ConfigWrite(_) => "config",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
