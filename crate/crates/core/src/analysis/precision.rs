use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{linear_regression, mean, std_dev};
use super::{AnalysisError, FringeFit, SweepSetup};
use crate::sequencer::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionOptions {
    /// Independent power measurements used for the standard deviation.
    pub repeats: usize,
    /// Batches averaged into one power measurement (the integration time).
    pub batches_per_repeat: usize,
}

impl Default for PrecisionOptions {
    fn default() -> Self {
        Self {
            repeats: 200,
            batches_per_repeat: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub storage_time: f64,
    /// `δB = δ⟨i₊²⟩ / |∂⟨i₊²⟩/∂B|`.
    pub delta_b: f64,
    /// Standard error of `δB` from the finite number of repeats.
    pub spread: f64,
    pub power_std: f64,
    pub slope: f64,
    pub operating_point: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    pub rows: Vec<PrecisionRow>,
    /// Log-log slope of `δB` against `Δτ`.
    pub exponent: f64,
    pub exponent_error: f64,
}

impl PrecisionCurve {
    pub fn from_rows(rows: Vec<PrecisionRow>) -> Result<Self, AnalysisError> {
        let (exponent, exponent_error) = fit_power_law(&rows)?;
        Ok(Self {
            rows,
            exponent,
            exponent_error,
        })
    }
}

/// Field of maximum fringe slope closest to `near`, and `|∂P/∂B|` there.
/// Only the rising flank `kB − θ = −π/2 (mod 2π)` is used, so points picked
/// for different storage times sit at the same fringe phase.
pub fn operating_point(fit: &FringeFit, near: f64) -> Result<(f64, f64), AnalysisError> {
    let slope = (fit.offset * fit.visibility * fit.wavenumber).abs();
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(AnalysisError::OperatingPoint(
            "fringe slope is zero; the field is unmeasurable".into(),
        ));
    }
    let base = (fit.phase - FRAC_PI_2) / fit.wavenumber;
    let n = ((near - base) / fit.period).round();
    Ok((base + n * fit.period, slope))
}

/// Repeated power measurements at the fit's operating point.
pub fn precision(
    setup: &SweepSetup,
    fit: &FringeFit,
    near: f64,
    opts: &PrecisionOptions,
    seed: u64,
) -> Result<PrecisionRow, AnalysisError> {
    if opts.repeats < 10 {
        return Err(AnalysisError::InvalidParameter(
            "precision needs at least 10 repeats".into(),
        ));
    }
    if opts.batches_per_repeat == 0 {
        return Err(AnalysisError::InvalidParameter(
            "batches per repeat must be at least 1".into(),
        ));
    }
    let (b_star, slope) = operating_point(fit, near)?;
    let m = opts.batches_per_repeat;
    let powers = (0..opts.repeats)
        .into_par_iter()
        .map(|j| {
            let p: Vec<f64> = (0..m)
                .map(|i| setup.power_at(b_star, derive_seed(seed, (j * m + i) as u64)))
                .collect::<Result<_, _>>()?;
            Ok(mean(&p))
        })
        .collect::<Result<Vec<f64>, AnalysisError>>()?;
    let power_std = std_dev(&powers);
    let delta_b = power_std / slope;
    if !(delta_b > 0.0) {
        return Err(AnalysisError::OperatingPoint(
            "power does not fluctuate; add detector noise or drift".into(),
        ));
    }
    Ok(PrecisionRow {
        storage_time: setup.memory.storage_time,
        delta_b,
        spread: delta_b / (2.0 * (opts.repeats as f64 - 1.0)).sqrt(),
        power_std,
        slope,
        operating_point: b_star,
    })
}

/// `(exponent, error)` of `δB ∝ Δτ^exponent` by least squares in log-log.
pub fn fit_power_law(rows: &[PrecisionRow]) -> Result<(f64, f64), AnalysisError> {
    if rows.len() < 2 {
        return Err(AnalysisError::InsufficientData(
            "power law needs at least two storage times".into(),
        ));
    }
    if rows
        .iter()
        .any(|r| !(r.delta_b > 0.0) || !(r.storage_time > 0.0))
    {
        return Err(AnalysisError::InvalidParameter(
            "power law needs positive δB and storage times".into(),
        ));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.storage_time.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.delta_b.ln()).collect();
    let f = linear_regression(&x, &y);
    Ok((f.slope, f.slope_error))
}
