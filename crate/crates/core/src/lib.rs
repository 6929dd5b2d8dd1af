//! Intrinsic active precision and coherence-gated attention.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: small dense matrices, stable softmax, seeded randomness and
//!   a central-difference gradient oracle.
//! - [`tpn`]: the two-point-neuron modulation transfer `MOD(R, C)` and the
//!   mental-state regimes that scale its evidence and context streams.
//! - [`precision`]: context assembly with feedback, the clamped pairwise
//!   active-precision matrix, inverse-variance precision and effective rate.
//! - [`attention`]: baseline and precision-gated scaled-dot-product attention,
//!   analytic gradients, and precision-weighted belief updates.
//! - [`sim`]: a lateral lane-following task under a mixed relevant/distractor
//!   signal stream, comparing salience-first and coherence-first agents.
//! - [`harness`]: experiment configs, paired-seed grids, reports and the
//!   verification suites behind the `co4` binary.

pub mod attention;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod precision;
pub mod sim;
pub mod tpn;

pub use error::{Error, Result};
