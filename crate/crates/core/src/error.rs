//! Error type shared by all core modules.

use thiserror::Error;

/// Errors raised by state construction, protocol maps, measures, and the
/// SDP layer.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A matrix or state dimension does not match what the operation needs.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A constructed object would exceed the configured dimension cap.
    #[error("dimension {requested} exceeds the configured maximum {max}")]
    DimensionLimit { requested: usize, max: usize },

    /// Input expected to be Hermitian is not, beyond tolerance.
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// Input expected to be positive semidefinite has a significantly
    /// negative eigenvalue.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e}")]
    NotPositive { eigenvalue: f64 },

    /// Pure-state amplitudes do not have unit norm.
    #[error("state norm {measured} deviates from 1 beyond tolerance")]
    NormViolation { measured: f64 },

    /// Density matrix trace is not 1.
    #[error("density matrix trace {measured} deviates from 1 beyond tolerance")]
    TraceViolation { measured: f64 },

    /// Vectors expected to be linearly independent are not.
    #[error("vectors are linearly dependent (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    /// A parameter is outside its documented range.
    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// State passed to a protocol-form operation is not supported on the
    /// protocol image subspace.
    #[error("state is not of protocol form: weight {weight:.3e} lies outside the image subspace")]
    NotProtocolForm { weight: f64 },

    /// Malformed state or report JSON.
    #[error("invalid state JSON: {0}")]
    InvalidJson(String),

    /// No epsilon in the search grid made the perturbed Gram matrix
    /// positive definite.
    #[error("epsilon search failed: M(eps) is not positive definite for any tested eps")]
    EpsilonSearchFailed,

    /// The local filter is singular at lambda = 1.
    #[error("local filter undefined: lambda = 1 makes L singular")]
    FilterSingular,

    /// The SDP solver hit its iteration limit before certifying optimality.
    #[error("SDP solver did not converge: duality gap {gap:.3e} after {iterations} iterations")]
    SolverNonConvergence { gap: f64, iterations: usize },

    /// The SDP starting point supplied with the problem is not strictly
    /// feasible.
    #[error("SDP starting point is not strictly feasible: {0}")]
    InfeasibleStart(String),

    /// Too many index subsets for the combinatorial guard.
    #[error("subset count {count} exceeds the limit {limit}")]
    SubsetOverflow { count: usize, limit: usize },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
