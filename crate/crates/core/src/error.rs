use thiserror::Error;

/// Failure modes shared by every stage of the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} outside the range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    /// Input data does not satisfy an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A physical or configuration parameter is invalid.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An iterative method did not converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Two routes to the same quantity disagree beyond tolerance.
    #[error("numerical consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
