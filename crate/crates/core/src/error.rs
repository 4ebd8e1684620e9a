use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs failed validation (scenario assumptions, configuration, CLI arguments).
    #[error("validation error: {0}")]
    Validation(String),

    /// A series did not reach its stopping tolerance within the allowed number of terms.
    #[error("kernel series did not converge: last term {last_term:e} after {terms} terms (tol {tol:e})")]
    Truncation { terms: usize, last_term: f64, tol: f64 },

    /// The error surface recursion went negative.
    #[error("error surface became negative ({value:e}) at node ({i}, {j}); refine the grid")]
    Instability { i: usize, j: usize, value: f64 },

    /// A requested table would exceed the configured memory budget.
    #[error("kernel table needs {needed} entries, budget is {budget}; use a product-form F or a smaller grid")]
    Size { needed: usize, budget: usize },

    /// Linear-algebra failure (non positive-definite covariance, etc).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for this error: 2 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Truncation { .. }
            | Error::Instability { .. }
            | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
