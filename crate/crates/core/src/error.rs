use thiserror::Error;

/// Errors raised while constructing operators, rules and checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A construction parameter violates a required inequality.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The input domain cannot be used (empty tiling, degenerate polygon, ...).
    #[error("invalid domain: {0}")]
    Domain(String),
    /// A quadrature range does not cover the support of the integrand.
    #[error("quadrature range [{lo}, {hi}] does not cover the required interval [{need_lo}, {need_hi}]")]
    Coverage {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },
    /// An operator failed a structural contract on witness functions.
    #[error("operator contract violated: {0}")]
    Contract(String),
    /// A precondition of a verification routine does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
