//! Pulse envelopes, local-oscillator and detector models, and synthesis of
//! balanced-heterodyne photocurrent traces for a single interferometer shot.
//!
//! Conventions used throughout the crate:
//!
//! * times are seconds, the detuning is stored as an angular frequency
//!   (rad/s) and bandwidths are RMS values in Hz;
//! * the quadrature of a field with amplitude `E`, envelope `a(t)` and phase
//!   `φ` is `X(t) = 2·E·a(t)·cos(δω·t − φ)`;
//! * the photocurrent is `gain · |ℰ| · (k ⊛ X)(t)` plus additive white noise,
//!   where the detector kernel `k` has unit DC gain.

mod detector;
mod field;
mod grid;
mod profile;
mod synth;
mod trace;

use thiserror::Error;

pub use detector::{DetectorModel, DetectorResponse};
pub use field::{FieldPair, LoConfig};
pub use grid::TimeGrid;
pub use profile::{normalize_profile, PulseProfile, PulseShape};
pub use synth::{quadrature, synth_shot, ShotConfig};
pub use trace::{Trace, TraceLabel, TraceMeta};

/// Envelope level, relative to the pulse peak, above which a pulse touching
/// the edge of the window counts as truncated.
pub const TRUNCATION_LEVEL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("pulse envelope is identically zero on the grid; normalization impossible")]
    NormalizationImpossible,
    #[error("pulse envelope is not finite at t = {0:e} s")]
    NonFinite(f64),
    #[error("{label} pulse truncated by the window (edge level {level:.3e} of peak)")]
    WindowTooShort { label: &'static str, level: f64 },
    #[error("aliasing: sample rate {sample_rate:e} Hz must exceed {required:e} Hz")]
    Aliasing { sample_rate: f64, required: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> SignalError {
    SignalError::InvalidParameter(msg.into())
}
