use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative power of a singular element (smallest eigenvalue {min_eigenvalue:e})")]
    NegativePowerOfSingular { min_eigenvalue: f64 },

    #[error("element is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositive { eigenvalue: f64 },

    #[error("element is not in the algebra of the trace space (off-block entry {entry:e})")]
    NotInAlgebra { entry: f64 },

    #[error("Rademacher enumeration over {n} terms exceeds the 2^{max} budget")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("element is not in the range of the Jordan multiplier (dead-corner entry {entry:e})")]
    NotInRange { entry: f64 },

    #[error("unitary does not commute with the density (defect {defect:e})")]
    NonCommuting { defect: f64 },

    #[error("degenerate instance (left-hand side {lhs:e})")]
    DegenerateInstance { lhs: f64 },

    #[error("boundary quadrature did not converge (error estimate {estimate:e})")]
    QuadratureNotConverged { estimate: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
