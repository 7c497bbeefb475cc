use thiserror::Error;

/// Errors raised by the solver and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidStates(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{count} contingencies exceed the enumeration ceiling of {ceiling}")]
    TooLarge { count: usize, ceiling: usize },

    #[error("search budget exceeded: {required} evaluations requested, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("adjacent cells {index} and {next} carry zero joint mass")]
    ZeroComponent { index: usize, next: usize },

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("noisy observation model undefined: {0}")]
    UndefinedModel(String),

    #[error("rational parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
