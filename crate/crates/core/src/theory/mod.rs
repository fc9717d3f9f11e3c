//! Closed-form fringe and visibility predictions, pulse correlation
//! functions, spectral convolution and a brute-force power oracle.

mod correlation;
mod oracle;
mod spectral;

use thiserror::Error;

pub use correlation::{cross_correlation, overlap, CorrelationFunction};
pub use oracle::{oracle_power, OracleMode, OracleOptions, OracleResult, PhaseAverage};
pub use spectral::{visibility_theory, Provenance, SpectralFunction};

use crate::signal::SignalError;

/// `2·sqrt(2·ln 2)`.
pub const FWHM_PER_RMS: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("spectra are on incompatible frequency grids; resample required ({0})")]
    ResampleRequired(String),
    #[error("oracle did not converge: relative change {change:.3e} after {refinements} refinements (step {step:.3e} s)")]
    RefineGrid {
        change: f64,
        refinements: usize,
        step: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub fn fwhm_to_rms(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_RMS
}

pub fn rms_to_fwhm(rms: f64) -> f64 {
    rms * FWHM_PER_RMS
}

/// `2·sqrt(I_T·I_R) / (I_T + I_R)`, zero when both ports are dark.
pub fn ideal_visibility(intensity_t: f64, intensity_r: f64) -> f64 {
    let sum = intensity_t + intensity_r;
    if sum <= 0.0 {
        return 0.0;
    }
    2.0 * (intensity_t * intensity_r).sqrt() / sum
}

/// Mean photocurrent power of the two-pulse interferometer,
/// `2K|ℰ|²(I_T + I_R)[1 + 𝒱₀·cos(δω·Δτ − Δφ)]`.
pub fn mean_power_analytic(
    intensity_t: f64,
    intensity_r: f64,
    detuning: f64,
    storage_time: f64,
    spin_phase: f64,
    k_const: f64,
    lo_amplitude: f64,
) -> f64 {
    let v0 = ideal_visibility(intensity_t, intensity_r);
    2.0 * k_const
        * lo_amplitude
        * lo_amplitude
        * (intensity_t + intensity_r)
        * (1.0 + v0 * (detuning * storage_time - spin_phase).cos())
}

/// Overlap `∫a₁a₂ dt` of two normalized, co-centered gaussians.
pub fn gaussian_overlap(sigma_1: f64, sigma_2: f64) -> f64 {
    (2.0 * sigma_1 * sigma_2 / (sigma_1 * sigma_1 + sigma_2 * sigma_2)).sqrt()
}
