use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("requested accuracy {requested:e} not met (achieved {achieved:e} after {evals} evaluations)")]
    AccuracyNotMet {
        requested: f64,
        achieved: f64,
        evals: usize,
    },

    #[error("no common reference measure: {0}")]
    NoCommonReference(String),

    #[error("unsupported null for this operation: {0}")]
    UnsupportedNull(String),

    #[error("alternative is not absolutely continuous: {0}")]
    NotAbsolutelyContinuous(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_weights: Vec<f64>,
        last_residuals: Vec<f64>,
    },

    #[error("root bracketing failed: {0}")]
    BracketFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
