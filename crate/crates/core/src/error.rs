use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A delay, lag, or time is not an integer multiple of the grid step.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Inconsistent dimensions between measures, segments, matrices, or paths.
    #[error("shape error: {0}")]
    Shape(String),

    /// A query outside the stored range of a path, table, or trajectory.
    #[error("range error: {0}")]
    Range(String),

    /// A stated precondition of an operation is violated.
    #[error("precondition error: {0}")]
    Precondition(String),

    /// The integration produced a non-finite or overflowing value.
    #[error("overflow at t = {node}: {message}")]
    Overflow { node: f64, message: String },

    /// A characteristic root lies on (or too close to) the counting contour.
    #[error("root on contour at Re(lambda) = {beta}: perturb beta and retry")]
    RootOnContour { beta: f64 },

    /// An iterative procedure failed to converge.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// Expression parsing failed.
    #[error("syntax error at position {position}: {message}")]
    Parse { position: usize, message: String },

    /// Expression evaluation produced a non-finite value or hit an unknown symbol.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A stationary segment was requested for an uncertified nonlinear system.
    #[error("certification error: {0}")]
    Certification(String),

    /// Invalid Monte Carlo request (e.g. fewer than two replicas).
    #[error("statistics error: {0}")]
    Statistics(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
