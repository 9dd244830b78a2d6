use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("{0}")]
    OutOfRange(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("enumeration budget exceeded: {required:.0} candidates required, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { best: Vec<f64>, residual: f64, iterations: usize },

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("image format: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
