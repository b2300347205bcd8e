//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An exponent evaluator returned NaN or an infinity at a sample point.
    #[error("non-finite exponent value at ({x}, {y})")]
    NonFiniteExponent { x: f64, y: f64 },

    /// Invalid argument for a pointwise formula (e.g. conjugate of p <= 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine failed to bracket or converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A quadrature density evaluated to NaN/inf; reports the offending element.
    #[error("non-finite value in element {element}: {context}")]
    NonFiniteValue { element: usize, context: String },

    /// Rayleigh quotient requested for a function with vanishing denominator.
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    /// Iteration cap reached without meeting the stopping test.
    #[error("maximum iterations ({0}) exceeded")]
    MaxIterations(usize),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Problem configuration file could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Expression grammar parse failure.
    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
