use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    batch_power, demodulate, fit_fringe_with, precision, AnalysisError, FitOptions, FringeFit,
    PipelineMode, PrecisionCurve, PrecisionOptions, WindowSpec,
};
use crate::sequencer::{
    derive_seed, fringe_period, run_batch, MemoryConfig, SequenceConfig, ShotBatch,
};
use crate::signal::{DetectorModel, LoConfig};

/// Everything needed to turn a field value and a seed into a mean power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub sequence: SequenceConfig,
    pub memory: MemoryConfig,
    pub lo: LoConfig,
    pub detector: DetectorModel,
    pub pipeline: PipelineMode,
    /// Analysis window; `None` uses [`WindowSpec::for_batch`].
    pub window: Option<WindowSpec>,
}

impl SweepSetup {
    pub fn batch(&self, b_field: f64, seed: u64) -> Result<ShotBatch, AnalysisError> {
        Ok(run_batch(
            &self.sequence,
            &self.memory,
            &self.lo,
            &self.detector,
            b_field,
            seed,
        )?)
    }

    pub fn window_for(&self, batch: &ShotBatch) -> WindowSpec {
        self.window
            .unwrap_or_else(|| WindowSpec::for_batch(&batch.meta))
    }

    pub fn power(&self, batch: &ShotBatch) -> Result<f64, AnalysisError> {
        batch_power(batch, &self.window_for(batch), &self.pipeline)
    }

    pub fn power_at(&self, b_field: f64, seed: u64) -> Result<f64, AnalysisError> {
        self.power(&self.batch(b_field, seed)?)
    }

    pub fn with_storage_time(&self, storage_time: f64) -> Self {
        let mut s = self.clone();
        s.memory.storage_time = storage_time;
        s
    }

    pub fn with_detuning_hz(&self, detuning_hz: f64) -> Self {
        let mut s = self.clone();
        s.lo = LoConfig {
            detuning: std::f64::consts::TAU * detuning_hz,
            ..self.lo
        };
        s
    }

    /// `points` field values evenly covering `periods` fringe periods
    /// starting at `start`.
    pub fn field_grid(&self, start: f64, periods: f64, points: usize) -> Vec<f64> {
        let span = periods * fringe_period(&self.memory);
        (0..points)
            .map(|i| start + span * i as f64 / (points.max(2) - 1) as f64)
            .collect()
    }
}

/// Mean power at each field value; each point gets its own seed stream.
pub fn fringe_sweep(
    setup: &SweepSetup,
    b_values: &[f64],
    seed: u64,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    b_values
        .par_iter()
        .enumerate()
        .map(|(i, &b)| Ok((b, setup.power_at(b, derive_seed(seed, i as u64))?)))
        .collect()
}

fn fit_sweep(setup: &SweepSetup, points: &[(f64, f64)]) -> Result<FringeFit, AnalysisError> {
    let k0 = setup.memory.gamma * setup.memory.storage_time;
    fit_fringe_with(points, k0, &FitOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub detuning_hz: f64,
    pub fit: FringeFit,
    /// Fringe amplitude `C·𝒱` relative to the offset `C` at the reference
    /// (first) detuning.
    pub referenced_visibility: f64,
}

/// Fringe fits across LO detunings. Because every term of the mean power
/// shares the same detuning dependence in a linear pipeline, the fitted
/// contrast alone does not change with `δω`; the referenced visibility
/// compares the fringe amplitude against the mean power at the first
/// detuning instead.
pub fn visibility_sweep(
    setup: &SweepSetup,
    detunings_hz: &[f64],
    b_values: &[f64],
    seed: u64,
) -> Result<Vec<VisibilityPoint>, AnalysisError> {
    let mut out: Vec<VisibilityPoint> = Vec::with_capacity(detunings_hz.len());
    let mut reference = None;
    for (i, &f) in detunings_hz.iter().enumerate() {
        let s = setup.with_detuning_hz(f);
        let pts = fringe_sweep(&s, b_values, derive_seed(seed, i as u64))?;
        let fit = fit_sweep(&s, &pts)?;
        let c_ref = *reference.get_or_insert(fit.offset);
        out.push(VisibilityPoint {
            detuning_hz: f,
            fit,
            referenced_visibility: fit.amplitude() / c_ref,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSweep {
    pub curve: PrecisionCurve,
    pub fits: Vec<FringeFit>,
}

/// For each storage time: sweep the field over `periods` fringe periods,
/// fit, and measure the field precision at the operating point. The same
/// seed is reused at every storage time so the noise realizations match.
pub fn storage_sweep(
    setup: &SweepSetup,
    storage_times: &[f64],
    sweep_points: usize,
    periods: f64,
    opts: &PrecisionOptions,
    seed: u64,
) -> Result<StorageSweep, AnalysisError> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &tau in storage_times {
        let s = setup.with_storage_time(tau);
        let b = s.field_grid(0.0, periods, sweep_points);
        let pts = fringe_sweep(&s, &b, derive_seed(seed, 1))?;
        let fit = fit_sweep(&s, &pts)?;
        let near = 0.5 * (b[0] + b[b.len() - 1]);
        rows.push(precision(&s, &fit, near, opts, derive_seed(seed, 2))?);
        fits.push(fit);
    }
    Ok(StorageSweep {
        curve: PrecisionCurve::from_rows(rows)?,
        fits,
    })
}

/// Demodulated phases of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub b_field: f64,
    pub shot: usize,
    pub phase_t: f64,
    pub phase_r: f64,
    pub amplitude_t: f64,
    pub amplitude_r: f64,
    pub drift_phase: f64,
}

/// Demodulate T and R of every shot of a batch at each field value. The R
/// record is demodulated over the analysis window delayed by `ΔT_e`.
pub fn phase_sweep(
    setup: &SweepSetup,
    b_values: &[f64],
    seed: u64,
) -> Result<Vec<PhaseSample>, AnalysisError> {
    let per_b: Vec<Vec<PhaseSample>> = b_values
        .par_iter()
        .enumerate()
        .map(|(i, &b)| {
            let batch = setup.batch(b, derive_seed(seed, i as u64))?;
            let w = setup.window_for(&batch);
            let dw = batch.detuning();
            batch
                .shots
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let t = demodulate(&s.t, dw, w.start, w.end)?;
                    let r = demodulate(
                        &s.r,
                        dw,
                        w.start + w.electronic_delay,
                        w.end + w.electronic_delay,
                    )?;
                    Ok(PhaseSample {
                        b_field: b,
                        shot: k,
                        phase_t: t.phase,
                        phase_r: r.phase,
                        amplitude_t: t.amplitude,
                        amplitude_r: r.amplitude,
                        drift_phase: s.drift_phase,
                    })
                })
                .collect()
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(per_b.into_iter().flatten().collect())
}
