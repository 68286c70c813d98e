use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process specification: {0}")]
    InvalidSpec(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact enumeration would exceed its budget.
    #[error("enumeration budget exceeded: {needed} > {budget} ({hint})")]
    BudgetExceeded { needed: f64, budget: f64, hint: &'static str },

    /// Variance is zero (or numerically zero); the statistic cannot be
    /// standardized.
    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    /// A mathematical precondition of the requested bound does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("process is not discrete: {0}")]
    NotDiscrete(String),
}
