//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the supported parameter domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An evaluation point fell too close to a branch cut or a pole of the
    /// integrand for the result to be trustworthy.
    #[error("branch cut proximity: {0}")]
    CutProximity(String),

    /// An iterative scheme failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A result was produced but its internal accuracy diagnostic exceeded
    /// the allowed threshold.
    #[error("accuracy target missed: {0}")]
    Accuracy(String),

    /// A linear system was too ill-conditioned to solve reliably.
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    /// A root bracket could not be established.
    #[error("bracketing failure: {0}")]
    Bracketing(String),

    /// The Painleve solver ran into a pole of the solution.
    #[error("pole encountered: {0}")]
    Pole(String),

    /// A dense linear-algebra backend call failed.
    #[error("linear algebra backend: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;
