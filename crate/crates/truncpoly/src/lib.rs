//! Orthogonal polynomials and characteristic-polynomial moments for
//! truncated Haar-unitary random matrices.
//!
//! The library is organized around one model family: the planar measure
//! `(1 - |z|^2)^(alpha-1) |z - x|^gamma` on the unit disc (the eigenvalue
//! weight of an n x n corner of an N x N Haar unitary, `alpha = N - n`,
//! with a point charge `gamma` at `x`), together with its equivalent
//! contour formulation on a loop around `[0, 1]`.
//!
//! Modules:
//! - [`model`]: parameters, weights, phase functions and branch conventions;
//! - [`specfun`]: complex log-gamma, incomplete gamma, Barnes G;
//! - [`linalg`]: small dense complex solvers (pivoted LU, log-determinants);
//! - [`quadrature`]: circle moments, disc rules, level-curve integrals;
//! - [`orthopoly`]: moment tables, Toeplitz chains, monic pairs, exact
//!   moments of the characteristic polynomial, differential identity;
//! - [`geometry`]: level curves of the phase function, region classification;
//! - [`asymptotics`]: large-n formulas for polynomials and moments, CLT;
//! - [`ensemble`]: Monte Carlo sampling of truncated unitaries;
//! - [`painleve`]: sigma-Painleve V solver for the weak non-unitarity regime;
//! - [`verify`]: the acceptance checklist used by tests and the CLI.

pub mod asymptotics;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod num;
pub mod orthopoly;
pub mod painleve;
pub mod quadrature;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
