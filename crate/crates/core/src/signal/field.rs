use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{invalid, PulseProfile, SignalError};

/// The transmitted (T) and retrieved (R) fields of one shot.
///
/// Phases follow `δφ_T = common_phase + φ_LO` and
/// `δφ_R = common_phase + φ_LO − accumulated_phase`, so the per-shot drift
/// cancels in `δφ_T − δφ_R = Δφ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub intensity_t: f64,
    pub intensity_r: f64,
    /// Per-shot drift `φ_drift`, common to T and R.
    pub common_phase: f64,
    /// Phase `Δφ` picked up by the stored spin wave.
    pub accumulated_phase: f64,
    pub profile_t: PulseProfile,
    /// R envelope in its own time frame; it is delayed by the storage time
    /// when synthesized.
    pub profile_r: PulseProfile,
}

impl FieldPair {
    pub fn amplitude_t(&self) -> f64 {
        self.intensity_t.sqrt()
    }

    pub fn amplitude_r(&self) -> f64 {
        self.intensity_r.sqrt()
    }

    pub fn phase_t(&self, lo: &LoConfig) -> f64 {
        self.common_phase + lo.phase
    }

    pub fn phase_r(&self, lo: &LoConfig) -> f64 {
        self.common_phase + lo.phase - self.accumulated_phase
    }

    /// Ideal fringe visibility `2√(I_T I_R) / (I_T + I_R)`.
    pub fn ideal_visibility(&self) -> f64 {
        crate::theory::ideal_visibility(self.intensity_t, self.intensity_r)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.intensity_t >= 0.0) || !(self.intensity_r >= 0.0) {
            return Err(invalid("field intensities must be non-negative"));
        }
        if !self.intensity_t.is_finite() || !self.intensity_r.is_finite() {
            return Err(invalid("field intensities must be finite"));
        }
        if !self.common_phase.is_finite() || !self.accumulated_phase.is_finite() {
            return Err(invalid("field phases must be finite"));
        }
        self.profile_t.shape().validate()?;
        self.profile_r.shape().validate()
    }
}

/// Local oscillator: amplitude `|ℰ|`, detuning `δω = ω_LO − ω_S` (rad/s) and
/// reference phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoConfig {
    pub amplitude: f64,
    pub detuning: f64,
    pub phase: f64,
}

impl LoConfig {
    pub fn new(amplitude: f64, detuning_hz: f64) -> Self {
        Self {
            amplitude,
            detuning: TAU * detuning_hz,
            phase: 0.0,
        }
    }

    pub fn detuning_hz(&self) -> f64 {
        self.detuning / TAU
    }

    pub fn validate(&self, sample_rate: f64) -> Result<(), SignalError> {
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(invalid("LO amplitude must be positive"));
        }
        if !self.phase.is_finite() {
            return Err(invalid("LO phase must be finite"));
        }
        if !(self.detuning_hz().abs() < 0.5 * sample_rate) {
            return Err(SignalError::Aliasing {
                sample_rate,
                required: 2.0 * self.detuning_hz().abs(),
            });
        }
        Ok(())
    }
}
