use thiserror::Error;

/// Error variants shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration value violates a constraint that is checked at run time.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A particle position became non-finite during an inner run.
    #[error("sampler diverged at inner iteration {iteration}")]
    DivergedSampler { iteration: usize },

    /// All particle weights collapsed to zero mass (-inf in log domain) or NaN.
    #[error("degenerate particle weights: {0}")]
    DegenerateWeights(String),

    /// An inner optimization loop failed to reach its tolerance.
    #[error("inner optimizer failed: {0}")]
    OptimizerFailure(String),

    /// Rejection sampling exceeded the trial cap without an acceptance.
    #[error("rejection sampling stalled after {trials} trials")]
    RejectionStall { trials: usize },

    /// A data or config file could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Spec validation failed; each entry names the offending key path.
    #[error("invalid experiment spec:\n{}", .0.join("\n"))]
    SpecValidation(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result type used throughout the library.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: impl Into<String>) -> Self {
        Error::DimensionMismatch(context.into())
    }
}
