//! Interference recovery from the T and R photocurrents: pulse-area
//! integration (slow detector), point-wise current addition (fast
//! detector), IQ demodulation, fringe fitting and field-precision estimates.

mod demod;
mod fringe;
mod power;
mod precision;
pub mod stats;
mod sweep;
mod window;

use thiserror::Error;

pub use demod::{demodulate, Demodulation};
pub use fringe::{fit_fringe, fit_fringe_with, FitOptions, FringeErrors, FringeFit};
pub use power::{
    batch_power, case1_from_scalars, case1_power, case2_power, case2_power_with, integrate_area,
    integrate_pair, pointwise_shot, shot_powers, AreaScalars, DelayMode, PipelineMode,
};
pub use precision::{
    fit_power_law, operating_point, precision, PrecisionCurve, PrecisionOptions, PrecisionRow,
};
pub use sweep::{
    fringe_sweep, phase_sweep, storage_sweep, visibility_sweep, PhaseSample, StorageSweep,
    SweepSetup, VisibilityPoint,
};
pub use window::WindowSpec;

use crate::sequencer::SequenceError;
use crate::signal::SignalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("range error: {0}")]
    Range(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("fringe fit needs at least 6 points spanning one period: {0}")]
    InsufficientData(String),
    #[error("fringe fit failed after {restarts} restarts: {reason} (best rms residual {residual_rms:.3e})")]
    FitFailed {
        restarts: usize,
        reason: String,
        residual_rms: f64,
    },
    #[error("operating point unusable: {0}")]
    OperatingPoint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}
