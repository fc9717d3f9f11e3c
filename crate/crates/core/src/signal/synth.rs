use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    invalid, DetectorModel, FieldPair, LoConfig, PulseProfile, SignalError, TimeGrid, Trace,
    TraceLabel, TraceMeta, TRUNCATION_LEVEL,
};

/// Everything needed to synthesize the T and R records of one shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub fields: FieldPair,
    pub lo: LoConfig,
    pub detector: DetectorModel,
    /// Storage time `Δτ` separating R from T.
    pub storage_time: f64,
    pub window_start: f64,
    pub window_duration: f64,
    pub shot_index: usize,
    pub labels: (TraceLabel, TraceLabel),
    pub seed: u64,
}

impl ShotConfig {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid::from_window(
            self.window_start,
            self.window_duration,
            self.detector.sample_rate,
        )
    }

    /// Normalized T profile and normalized, delayed R profile on the shot grid.
    pub fn normalized_profiles(&self) -> Result<(PulseProfile, PulseProfile), SignalError> {
        let grid = self.grid();
        let t = self.fields.profile_t.normalized(&grid)?;
        let r = self
            .fields
            .profile_r
            .shifted(self.storage_time)
            .normalized(&grid)?;
        Ok((t, r))
    }
}

/// `X(t_i) = 2·E·a(t_i)·cos(δω·t_i − φ)` on the grid.
pub fn quadrature(
    grid: &TimeGrid,
    amplitude: f64,
    profile: &PulseProfile,
    detuning: f64,
    phase: f64,
) -> Vec<f64> {
    grid.times()
        .map(|t| 2.0 * amplitude * profile.amplitude(t) * (detuning * t - phase).cos())
        .collect()
}

fn check_pulse(
    label: &'static str,
    profile: &PulseProfile,
    grid: &TimeGrid,
) -> Result<(), SignalError> {
    let level = profile.edge_level(grid);
    if level > TRUNCATION_LEVEL {
        return Err(SignalError::WindowTooShort { label, level });
    }
    Ok(())
}

/// Synthesize the T and R photocurrent records of one shot.
///
/// `i_j = gain·|ℰ|·(k ⊛ X_j) + n_j` with `X_R` built from `a_R(t − Δτ)` and
/// phase `δφ_R + δω·Δτ`. A port with zero intensity yields the pure noise
/// record.
pub fn synth_shot(cfg: &ShotConfig) -> Result<(Trace, Trace), SignalError> {
    cfg.detector.validate()?;
    cfg.lo.validate(cfg.detector.sample_rate)?;
    cfg.fields.validate()?;
    if !(cfg.storage_time >= 0.0) || !cfg.storage_time.is_finite() {
        return Err(invalid("storage time must be finite and non-negative"));
    }
    let grid = cfg.grid();
    if grid.len == 0 {
        return Err(invalid("window holds no samples"));
    }

    let lo = &cfg.lo;
    let fields = &cfg.fields;
    let mut nyquist_need: f64 = 0.0;

    let mut make = |label: &'static str,
                    intensity: f64,
                    profile: PulseProfile,
                    phase: f64|
     -> Result<Vec<f64>, SignalError> {
        if intensity == 0.0 {
            return Ok(vec![0.0; grid.len]);
        }
        let p = profile.normalized(&grid)?;
        check_pulse(label, &p, &grid)?;
        nyquist_need = nyquist_need.max(p.spectral_rms_hz(&grid));
        Ok(quadrature(&grid, intensity.sqrt(), &p, lo.detuning, phase))
    };

    let x_t = make(
        "T",
        fields.intensity_t,
        fields.profile_t.clone(),
        fields.phase_t(lo),
    )?;
    let x_r = make(
        "R",
        fields.intensity_r,
        fields.profile_r.shifted(cfg.storage_time),
        fields.phase_r(lo) + lo.detuning * cfg.storage_time,
    )?;

    let required = 2.0 * (lo.detuning_hz().abs() + nyquist_need);
    if cfg.detector.sample_rate <= required {
        return Err(SignalError::Aliasing {
            sample_rate: cfg.detector.sample_rate,
            required,
        });
    }

    let scale = cfg.detector.gain * lo.amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.detector.noise_rms)
        .map_err(|e| invalid(format!("noise distribution: {e}")))?;

    let mut finish = |x: Vec<f64>, label: TraceLabel| {
        let mut y = cfg.detector.filter(&x);
        for v in &mut y {
            *v *= scale;
        }
        if cfg.detector.noise_rms > 0.0 {
            for v in &mut y {
                *v += noise.sample(&mut rng);
            }
        }
        Trace::new(
            grid.t0,
            grid.sample_rate,
            y,
            TraceMeta {
                shot: cfg.shot_index,
                label,
            },
        )
    };
    let t = finish(x_t, cfg.labels.0);
    let r = finish(x_r, cfg.labels.1);
    Ok((t, r))
}
