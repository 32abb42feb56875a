//! Central numerical tolerances.
//!
//! Every approximate comparison in the crate goes through one of these
//! constants so that the acceptance thresholds live in exactly one place.
//! Functions that accept an explicit `tol` argument default to these values;
//! pass a different value to override.

/// Maximum Frobenius defect ‖M − M†‖ (relative to max(1, ‖M‖)) accepted by
/// the Hermitian eigensolver before it refuses the input.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Eigenvalue floor for positive-semidefiniteness tests: a Hermitian matrix
/// counts as PSD when its smallest eigenvalue is ≥ −PSD_TOL.
pub const PSD_TOL: f64 = 1e-9;

/// Default Frobenius-distance threshold for equality of matrices and of
/// channels (compared via their Choi matrices).
pub const EQ_TOL: f64 = 1e-9;

/// Relative eigenvalue cutoff for numerical-rank decisions: eigenvalues below
/// RANK_TOL × (largest eigenvalue) are treated as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Threshold below which a residual amplitude coefficient √(1 − Σ|γ|²)
/// counts as exactly zero. Extraction recovers each pin by dividing a
/// cross-block residue by this coefficient; dividing by a value this small
/// would amplify roundoff past any useful precision, and the data it would
/// recover no longer influences the channel (the pin enters every Kraus
/// operator with weight ≤ BOUNDARY_EPS), so extractors return a zero pin
/// and flag the entry as indeterminate instead.
pub const BOUNDARY_EPS: f64 = 1e-6;
