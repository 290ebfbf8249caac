use thiserror::Error;

/// Errors raised by data ingestion, model fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid csv: {0}")]
    Csv(String),

    #[error("unknown lithology term {term:?}; accepted terms: {accepted}")]
    UnknownLithology { term: String, accepted: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("actual values are constant; r2 is undefined")]
    ConstantTarget,

    #[error(
        "lasso did not converge after {sweeps} sweeps (last max coordinate change {last_change:e})"
    )]
    LassoNotConverged {
        sweeps: usize,
        last_change: f64,
        last_weights: Vec<f64>,
        last_intercept: f64,
    },

    #[error("svr did not converge after {iterations} updates (max KKT violation {violation:e})")]
    SvrNotConverged {
        iterations: usize,
        violation: f64,
        last_coefficients: Vec<f64>,
        last_bias: f64,
    },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("physics: {0}")]
    Physics(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps the error with a short description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
