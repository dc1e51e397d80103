use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into input problems (bad specs, bad arguments) and
/// numerical failures; [`Error::is_usage`] tells them apart so front ends
/// can pick an exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },

    #[error("cannot read sigma file {path}: {reason}")]
    File { path: PathBuf, reason: String },

    #[error("sigma value at index {index} is {value}, expected a finite positive number")]
    NonPositive { index: usize, value: f64 },

    #[error("explicit sigma list has {available} entries but n = {requested}")]
    InsufficientLength { available: usize, requested: usize },

    #[error("explicit sigma sequences have no limit; use the finite-n averages S_(n,k)/n instead")]
    NoLimit,

    #[error("{what} = {value} is out of range ({range})")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parts sum to {sum}, expected {total}")]
    PartsMismatch { total: u64, sum: u64 },

    #[error("degree profile {0:?} is not a valid tree degree distribution")]
    InvalidProfile(Vec<u32>),

    #[error("matrix dimension {n} must exceed the moment order s = {s}")]
    DimensionTooSmall { n: usize, s: usize },

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("variance {variance} at ({i}, {j}) is incompatible with entry bound K = {bound} for {distribution}")]
    BoundIncompatible {
        i: usize,
        j: usize,
        variance: f64,
        bound: f64,
        distribution: &'static str,
    },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("walk enumeration needs {requested} tuples, above the guard of {limit}")]
    GuardExceeded { requested: f64, limit: f64 },

    #[error("Hankel matrix H0 is not positive definite (pivot {pivot} of {size}); not a valid moment sequence")]
    InvalidMomentSequence { pivot: usize, size: usize },

    #[error("no feasible upper bracket found for the pencil below {limit:e}")]
    BracketFailure { limit: f64 },

    #[error("factorization of H0 broke down at pivot {pivot}; condition estimate {condition:e}")]
    Factorization { pivot: usize, condition: f64 },
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::File { .. }
                | Error::NonPositive { .. }
                | Error::BoundIncompatible { .. }
                | Error::NoLimit
                | Error::OutOfRange { .. }
                | Error::InvalidArgument(_)
                | Error::PartsMismatch { .. }
                | Error::InvalidProfile(_)
                | Error::InsufficientLength { .. }
                | Error::DimensionTooSmall { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
