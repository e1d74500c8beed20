use thiserror::Error;

/// Errors raised by the cocycle engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input (bad dimensions, symbols, non-finite entries).
    #[error("input error: {0}")]
    Input(String),

    /// A well-formed value outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Floating point breakdown (overflow, ill-conditioning).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The requested enumeration would visit more leaves than the budget allows.
    #[error("enumeration budget exceeded: k^n = {k}^{n} = {leaves} leaves, budget {budget}")]
    Budget {
        k: usize,
        n: usize,
        leaves: String,
        budget: u64,
    },

    /// Syntax or shape problem in a cocycle file.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The file parsed but describes an invalid cocycle.
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
