//! Irreversible Metropolis sampling on (position, momentum) pairs.
//!
//! The central kernel is HAMS (Hamiltonian-assisted Metropolis sampling): a
//! stochastic proposal on the augmented state `(x, u)` driven by a correlated
//! noise pair with covariance `2A - A^2`, accepted or rejected with a
//! generalized Metropolis--Hastings probability in which the momentum is
//! negated both in the backward proposal and on rejection. Under a standard
//! Gaussian target the kernel is rejection-free.
//!
//! The crate also provides:
//!
//! - one-step underdamped-Langevin integrators (GJF, BAOAB, ABOBA, IL, BP,
//!   VEC, SPV, Mannella's leapfrog) in raw and rescaled/modified forms,
//!   together with the coefficient maps that embed them into (shifted) HAMS;
//! - Metropolis-adjusted BAOAB/ABOBA/BP with closed-form acceptance ratios;
//! - closed-form univariate-Gaussian analytics (stationary variance, expected
//!   acceptance rate, spectral radius and its optimal tuning);
//! - Cholesky preconditioning (whitening) of arbitrary target models;
//! - chain diagnostics: Bartlett-window and multi-chain effective sample
//!   sizes, configurational/kinetic temperature estimators, density error.

pub mod analytic;
pub mod diagnostics;
pub mod hams;
pub mod langevin;
pub mod linalg;
pub mod matching;
pub mod metropolized;
pub mod precondition;
pub mod rng;
pub mod targets;

use thiserror::Error;

/// Errors shared across the sampler toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A potential or gradient evaluation overflowed; the chain has diverged.
    #[error("non-finite {what} encountered (diverging chain?)")]
    NonFinite { what: &'static str },

    /// A 2x2 noise covariance failed its positive-semidefiniteness check.
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    /// A dense Cholesky factorization hit a nonpositive pivot.
    #[error("matrix is not positive definite (pivot {index}: {value})")]
    NotPd { index: usize, value: f64 },

    /// The full noise covariance `2A - A^2` is singular, so the generalized
    /// Hamiltonian is undefined; use the default-phi acceptance ratio instead.
    #[error("noise covariance 2A - A^2 is singular")]
    SingularCovariance,

    /// A closed form degenerates at this parameter value.
    #[error("degenerate parameter value: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Tuning-constraint violation in the spectral-radius optimizers.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// A series with zero sample variance has no autocorrelation structure.
    #[error("series has zero sample variance")]
    ZeroVariance,

    /// All chains are identical, so the between-chain variance vanishes.
    #[error("between-chain variance is numerically zero")]
    DegenerateBetween,

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    /// Step-size adaptation failed to settle near the target acceptance rate.
    #[error("step size tuning failed: trailing acceptance {acceptance:.3} vs target {target:.3}")]
    TuningFailed { acceptance: f64, target: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub use hams::{HamsCoeffs, HamsKernel, PhaseState, ProposalOutcome, SdeParams, ShiftedHamsCoeffs};
pub use langevin::{IntegratorKind, LinearKernel, Variant};
pub use metropolized::MaKind;
pub use rng::RngStream;
pub use targets::TargetModel;
