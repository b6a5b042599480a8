use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-convex scalar term: subgradient decreases between {lo} and {hi}")]
    NonConvex { lo: f64, hi: f64 },

    #[error("non-finite value at iteration {iteration}: {context}")]
    NonFinite { iteration: u64, context: String },

    #[error("no feasible grid point; most nearly feasible point {point:?} has max violation {violation}")]
    Infeasible { point: Vec<f64>, violation: f64 },

    #[error("missing constant: {0}")]
    MissingConstant(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
