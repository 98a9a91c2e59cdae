//! Conversion of multilevel coherence into genuine multipartite entanglement.
//!
//! The crate models a d-level system (qudit) coupled to ancilla registers,
//! implements the state-independent maps that turn k-level coherence into
//! k+1-partite entanglement (and back down to k-partite entanglement of the
//! ancillas alone), and quantifies both resources with fidelity-based
//! geometric measures. Closed forms, brute-force searches, and a small
//! certified semidefinite-programming solver provide independent routes to
//! the same quantities so the conversion identities can be checked
//! numerically.
//!
//! Module map:
//! - [`linalg`]: dense complex matrix kernel (Kronecker products, partial
//!   trace, Hermitian eigendecomposition, PSD square root, rank).
//! - [`hilbert`]: composite-space state model, classical frames, set
//!   partitions, JSON state I/O.
//! - [`protocol`]: activation unitary, QFT, decoupling unitary, one-way LOCC
//!   decoupling channel, Gram-matrix isometry construction and local filter.
//! - [`measures`]: coherence rank, Schmidt rank, entanglement depth,
//!   fidelity, geometric measures, and the conversion-bound harness.
//! - [`sdp`]: block-structured real SDPs, a barrier path-following solver,
//!   and builders for the fidelity and k-coherent-fidelity programs.
//!
//! # Example
//!
//! A maximally coherent qutrit activates into a genuinely 4-partite
//! entangled state whose geometric entanglement equals the input's
//! geometric coherence:
//!
//! ```
//! use cohent_core::hilbert::{PureState, SpaceShape};
//! use cohent_core::measures::{
//!     entanglement_depth_pure, geometric_coherence_pure,
//!     geometric_entanglement_protocol_pure,
//! };
//! use cohent_core::protocol::activate_pure;
//! use num_complex::Complex64;
//!
//! let amp = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
//! let psi = PureState::new(SpaceShape::qudit(3)?, vec![amp; 3])?;
//! let psi_prime = activate_pure(&psi)?;
//!
//! assert_eq!(entanglement_depth_pure(&psi_prime, 1e-9)?.depth, 4);
//! let c = geometric_coherence_pure(&psi, 2)?.value;
//! let e = geometric_entanglement_protocol_pure(&psi_prime, 2)?.value;
//! assert!((c - 2.0 / 3.0).abs() < 1e-12);
//! assert!((c - e).abs() < 1e-12);
//! # Ok::<(), cohent_core::CoreError>(())
//! ```

pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod measures;
pub mod protocol;
pub mod sdp;

pub use error::CoreError;
pub use hilbert::{ClassicalFrame, DensityMatrix, PureState, SetPartition, SpaceShape, StateFile};
pub use linalg::{ComplexMatrix, HermitianSpectrum};
pub use measures::{DepthReport, MeasureMethod, MeasureResult, SdpSolver};
pub use protocol::{IsometryBundle, IsometryVariant};
pub use sdp::{SdpProblem, SdpSolution};

/// Default cap on the total dimension of any composite space or matrix
/// product constructed by this crate.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Current cap on composite dimensions.
///
/// Reads `COHENT_MAX_DIM` on every call so command-line overrides apply to
/// all construction sites; falls back to [`DEFAULT_MAX_DIM`] when unset or
/// unparsable.
pub fn max_dim() -> usize {
    std::env::var("COHENT_MAX_DIM")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(DEFAULT_MAX_DIM)
}
