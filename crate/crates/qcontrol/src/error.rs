//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants carry
//! enough context (defect sizes, names, coordinates) for a caller to report a
//! useful diagnostic without re-deriving it.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Operand shapes are inconsistent (matrix products, kron factors,
    /// channel composition, wire widths, ...).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix expected to be Hermitian is not, beyond tolerance.
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    /// QR-based orthonormalization received a rank-deficient matrix.
    #[error("matrix is rank deficient (smallest R diagonal {0:.3e})")]
    RankDeficient(f64),

    /// A matrix expected to satisfy V†V = I does not.
    #[error("matrix is not an isometry: defect {0:.3e}")]
    NotIsometry(f64),

    /// A Kraus family fails the trace-preservation test Σ K†K = I.
    #[error("Kraus family is not trace preserving: defect {0:.3e}")]
    NotTracePreserving(f64),

    /// An amplitude vector fails the normalization test Σ |α|² = 1.
    #[error("amplitude vector is not normalized: defect {0:.3e}")]
    NotNormalized(f64),

    /// An operator is not a valid Kraus member of the given channel: the
    /// remainder map has a negative eigenvalue.
    #[error("operator is not a valid pin: minimum remainder eigenvalue {0:.3e}")]
    InvalidPin(f64),

    /// A pinned construction requires the pin to be the first Kraus operator.
    #[error("pin is not the first Kraus operator: distance {0:.3e}")]
    PinNotFirst(f64),

    /// A Kraus family sends amplitude across a sector pair the route forbids.
    #[error("route violation: {0}")]
    RouteViolation(String),

    /// A route matrix is structurally invalid (empty, ragged, or it
    /// annihilates an input sector).
    #[error("invalid route: {0}")]
    InvalidRoute(String),

    /// A channel handed to a decoder or extractor does not have the expected
    /// controlled structure.
    #[error("channel is not of the expected controlled form: {0}")]
    NotControlledForm(String),

    /// Interference amplitudes γ are out of range or mutually infeasible.
    #[error("infeasible interference amplitudes: {0}")]
    InfeasibleAmplitudes(String),

    /// Circuit-text syntax error with 1-based source coordinates.
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },

    /// Static-semantics error in a routed circuit (unknown name, reuse of a
    /// consumed wire, shape clash at an apply site, ...).
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    /// Evaluation was asked to run with an input slot left unbound.
    #[error("unbound slot: {0}")]
    UnboundSlot(String),

    /// A suite configuration violates its invariants (no trials, bad
    /// tolerance, empty dimension list).
    #[error("invalid suite config: {0}")]
    InvalidConfig(String),

    /// A CLI verb referenced a suite that does not exist.
    #[error("unknown suite: {0}")]
    UnknownSuite(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
