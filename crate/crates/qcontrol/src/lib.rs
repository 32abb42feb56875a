//! qcontrol — algebra of coherently controlled quantum channels.
//!
//! This crate implements, at verification grade, the linear-algebra layer
//! needed to build and compare controlled quantum channels:
//!
//! * [`tensor`] — dense complex matrices, Kronecker products, direct sums,
//!   partial traces, Hermitian eigendecomposition, QR orthonormalization,
//!   and a bit-exact JSON codec.
//! * [`channel`] — channels as Kraus families, Choi matrices, channel
//!   equality, pinned Kraus operators and canonical pinned forms, minimal
//!   Kraus representations, and seeded random channel generation.
//! * [`sectors`] — direct-sum partitioned spaces, Boolean routes between
//!   sector sets, route-respecting channels, and the sector-preserving
//!   channel types used as inputs to the control constructions.
//! * [`control`] — controlled channels on a control ⊗ target space: the
//!   controlled-unitary and pinned constructions, two-channel control, and
//!   multi-branch composite control with interference amplitudes.
//! * [`supermaps`] — circuit-level constructions that turn sector-preserving
//!   channels into controlled channels and back, their auxiliary-leg
//!   extensions, and a sampling verifier for routed supermaps.
//! * [`routedfmt`] — a small text format for routed circuits: parser,
//!   route checker and evaluator, plus the shipped fixtures.
//! * [`cli`] — the named verification suites behind the `qcontrol` binary.
//!
//! Numerical comparisons go through the centralized tolerances in
//! [`tensor::tol`]; randomized components draw from the deterministic
//! splittable generator in [`prng`].

pub mod channel;
pub mod cli;
pub mod control;
pub mod error;
pub mod prng;
pub mod routedfmt;
pub mod sectors;
pub mod supermaps;
pub mod tensor;

pub use channel::KrausChannel;
pub use error::{Error, Result};
pub use tensor::ComplexMatrix;
