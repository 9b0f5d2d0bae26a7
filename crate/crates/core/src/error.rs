use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{what} lost positive semi-definiteness (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("monodromy norm {norm:e} exceeds bound {bound:e}")]
    Overflow { norm: f64, bound: f64 },

    #[error("stable invariant subspace has dimension {dim}, expected {expected}")]
    NoStableSubspace { dim: usize, expected: usize },

    #[error("subspace basis block is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("{what} did not converge after {periods} periods (residual {residual:e})")]
    NotConverged { what: &'static str, periods: usize, residual: f64 },

    #[error("{what} diverged")]
    Diverged { what: &'static str },

    #[error("closed loop is not Floquet stable (largest multiplier modulus {max_modulus})")]
    UnstableClosedLoop { max_modulus: f64 },

    #[error("drift is unstable: {0}")]
    UnstableDrift(&'static str),

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("Schur decomposition failed")]
    SchurFailed,
}
