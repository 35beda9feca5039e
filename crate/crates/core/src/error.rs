use thiserror::Error;

/// Errors produced anywhere in the inference pipeline.
#[derive(Debug, Error)]
pub enum OcseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable dynamics: spectral radius {0} is not below 1")]
    Unstable(f64),

    #[error("every draw was nilpotent after {0} attempts; spectral radius cannot be tuned")]
    Nilpotent(usize),

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("Lyapunov iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("dimension {0} is too large for the Kronecker solver")]
    TooLarge(usize),

    #[error("singular linear system")]
    Singular,

    #[error("degenerate covariance: {0}")]
    Degenerate(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("no subset of cardinality <= {0} attains the maximal causation entropy")]
    CardinalityExceeded(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OcseError>;
