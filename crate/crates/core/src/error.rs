use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand sizes disagree.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// A scalar parameter is outside its admissible range.
    InvalidParameter { name: &'static str, value: f64, requirement: &'static str },
    /// Cholesky factorization hit a nonpositive pivot.
    NotPositiveDefinite { pivot: usize, value: f64 },
    /// Constraint matrix lacks full row rank.
    RankDeficient { rows: usize, deficient: usize },
    /// An iterative linear solve stopped before reaching its tolerance.
    LinearSolveFailed { iterations: usize, residual: f64 },
    /// Blocks of a separable prox do not partition the vector.
    InvalidBlocks(String),
    /// Stepsize outside `0 < alpha_k <= alpha_bar`.
    StepsizeOutOfRange { alpha_k: f64, alpha_bar: f64 },
    /// Iterates blew past the divergence threshold.
    Diverged { iter: usize, norm: f64 },
    /// A diagnostic norm requested in a metric that is not positive definite.
    MetricNotPositive(&'static str),
    /// Estimator used before it was initialized.
    Uninitialized(&'static str),
    /// Schedule is missing a field its kind requires.
    MissingScheduleField(&'static str),
    /// Graph is not connected.
    Disconnected { reached: usize, total: usize },
    /// An agent did not receive a message it needs this round.
    MissingMessage { receiver: usize, sender: usize },
    /// Problem too large for a routine that materializes dense data.
    TooLarge { dim: usize, limit: usize },
    /// An empty input where at least one element is required.
    Empty(&'static str),
    /// Fit input contains values that cannot be log-transformed.
    NonPositive { index: usize, value: f64 },
    /// A routine was asked to run a solver kind it does not implement.
    UnsupportedSolver(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { context, expected, found } => {
                write!(f, "{context}: expected dimension {expected}, found {found}")
            }
            Error::InvalidParameter { name, value, requirement } => {
                write!(f, "invalid {name} = {value}: requires {requirement}")
            }
            Error::NotPositiveDefinite { pivot, value } => {
                write!(f, "matrix not positive definite: pivot {pivot} is {value:e}")
            }
            Error::RankDeficient { rows, deficient } => {
                write!(f, "constraint matrix with {rows} rows is rank deficient by {deficient} row(s)")
            }
            Error::LinearSolveFailed { iterations, residual } => {
                write!(f, "linear solve stalled after {iterations} iterations at relative residual {residual:e}")
            }
            Error::InvalidBlocks(msg) => write!(f, "invalid block partition: {msg}"),
            Error::StepsizeOutOfRange { alpha_k, alpha_bar } => {
                write!(f, "stepsize {alpha_k} outside (0, {alpha_bar}]")
            }
            Error::Diverged { iter, norm } => {
                write!(f, "diverged at iteration {iter}: iterate norm {norm:e}")
            }
            Error::MetricNotPositive(cond) => write!(f, "metric is not positive definite: {cond}"),
            Error::Uninitialized(what) => write!(f, "{what} used before initialization"),
            Error::MissingScheduleField(field) => write!(f, "schedule requires `{field}`"),
            Error::Disconnected { reached, total } => {
                write!(f, "graph is disconnected: reached {reached} of {total} nodes")
            }
            Error::MissingMessage { receiver, sender } => {
                write!(f, "agent {receiver} is missing the message from agent {sender}")
            }
            Error::TooLarge { dim, limit } => write!(f, "dimension {dim} exceeds limit {limit}"),
            Error::Empty(what) => write!(f, "{what} is empty"),
            Error::NonPositive { index, value } => {
                write!(f, "value {value} at index {index} is not positive")
            }
            Error::UnsupportedSolver(kind) => write!(f, "solver kind {kind} is not supported here"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, found })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, requirement: "a finite positive value" })
    }
}
