//! Spectral moments and spectral-radius bounds for symmetric random matrices
//! whose entry variances form a rank-one pattern `Var{a_ij} = σ_i σ_j`.
//!
//! The crate is organised bottom-up:
//!
//! * [`sigma`] parses and evaluates variance profiles.
//! * [`combinatorics`] enumerates degree profiles and plane trees.
//! * [`moments`] evaluates limiting even moments and finite-n bounds.
//! * [`ensemble`] samples matrices and runs Monte Carlo campaigns.
//! * [`walk_oracle`] computes exact expected moments by walk enumeration.
//! * [`radius`] bounds the spectral radius, including the Hankel pencil.
//! * [`validation`] bundles the oracle cross-checks into a report.

pub mod combinatorics;
pub mod ensemble;
pub mod error;
pub mod moments;
pub mod numeric;
pub mod radius;
pub mod sigma;
pub mod validation;
pub mod walk_oracle;

pub use error::{Error, Result};
