use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {node} (x = {x})")]
    NonFinite { node: usize, x: f64, value: f64 },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("periodic function differs at its endpoints: {first} vs {last}")]
    PeriodicEndpoints { first: f64, last: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix row {0} is not defined")]
    UndefinedRow(usize),

    #[error("matrix row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("degenerate modulus: f({0}) = 0")]
    DegenerateModulus(f64),

    #[error("no admissible delta: |f(t) - f(x)| exceeds {epsilon} already between neighbouring nodes")]
    NoAdmissibleDelta { epsilon: f64 },

    #[error("verdict needs at least 8 residual points, got {0}")]
    TooFewPoints(usize),

    #[error("method kind `{0}` is not supported here")]
    UnsupportedMethod(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
