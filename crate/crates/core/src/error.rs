use thiserror::Error;

/// Errors raised by the discretization, sampling, and optimization layers.
#[derive(Debug, Error)]
pub enum SaaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("diffusion coefficient must be positive, found {value} on cell {cell}")]
    CoefficientPositivity { cell: usize, value: f64 },

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("eigenvalue bisection failed: {0}")]
    EigenSolver(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("requested dimension {requested} exceeds supported Sobol dimension {supported}")]
    UnsupportedDimension { requested: usize, supported: usize },

    #[error("model admissibility: {0}")]
    ModelAdmissibility(String),

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("line search stagnated at iteration {iteration}")]
    Stagnation {
        iteration: usize,
        trace: Box<crate::cond_grad::SolveTrace>,
    },

    #[error("study aborted: {0}")]
    StudyAbort(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SaaError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SaaError::InvalidArgument(msg.into()))
}
