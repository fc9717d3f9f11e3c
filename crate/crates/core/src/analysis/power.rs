use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, WindowSpec};
use crate::sequencer::ShotBatch;
use crate::signal::Trace;

/// How the R record is aligned with the T record before point-wise addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMode {
    /// Shift by the nearest whole number of samples.
    #[default]
    Nearest,
    /// Whole-sample shift plus a band-limited (FFT phase-ramp) fractional shift.
    Fractional,
}

/// Recovery pipeline applied to a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PipelineMode {
    /// Pulse-area integration, `⟨(i_T^k + i_R^k)²⟩`.
    Area { normalize: bool },
    /// Point-wise addition, `⟨∫(i_T + i_R)² dt⟩`.
    Pointwise { delay: DelayMode, normalize: bool },
}

impl PipelineMode {
    pub fn area() -> Self {
        PipelineMode::Area { normalize: false }
    }

    pub fn pointwise() -> Self {
        PipelineMode::Pointwise {
            delay: DelayMode::Nearest,
            normalize: false,
        }
    }
}

/// Per-shot signed pulse areas.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AreaScalars {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
}

fn window_sum(trace: &Trace, w: &WindowSpec, offset: f64) -> Result<f64, AnalysisError> {
    let range = w.sample_range(trace, offset)?;
    Ok(trace.samples()[range].iter().sum::<f64>() * trace.dt())
}

/// `(∫_{t1}^{t2} i_T dt, ∫_{t1+ΔT_e}^{t2+ΔT_e} i_R dt)` for one shot.
pub fn integrate_pair(t: &Trace, r: &Trace, w: &WindowSpec) -> Result<(f64, f64), AnalysisError> {
    Ok((
        window_sum(t, w, 0.0)?,
        window_sum(r, w, w.electronic_delay)?,
    ))
}

pub fn integrate_area(batch: &ShotBatch, w: &WindowSpec) -> Result<AreaScalars, AnalysisError> {
    let mut out = AreaScalars::default();
    for shot in &batch.shots {
        let (a, b) = integrate_pair(&shot.t, &shot.r, w)?;
        out.t.push(a);
        out.r.push(b);
    }
    Ok(out)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Factor applied to R so its RMS matches T's; one when R is dark.
fn balance_factor(t: &[f64], r: &[f64]) -> f64 {
    let (rt, rr) = (rms(t), rms(r));
    if rr > 0.0 && rt > 0.0 {
        rt / rr
    } else {
        1.0
    }
}

/// `(1/N)·Σ(i_T^k + i_R^k)²`, optionally after scaling the R areas to the
/// RMS of the T areas.
pub fn case1_from_scalars(s: &AreaScalars, normalize: bool) -> Result<f64, AnalysisError> {
    if s.t.is_empty() {
        return Err(AnalysisError::EmptyBatch);
    }
    if s.t.len() != s.r.len() {
        return Err(AnalysisError::InvalidParameter(
            "T and R area counts differ".into(),
        ));
    }
    let g = if normalize {
        let g = balance_factor(&s.t, &s.r);
        log::debug!("case I normalization: R areas scaled by {g:.6}");
        g
    } else {
        1.0
    };
    Ok(s.t
        .iter()
        .zip(&s.r)
        .map(|(a, b)| (a + g * b).powi(2))
        .sum::<f64>()
        / s.t.len() as f64)
}

pub fn case1_power(
    batch: &ShotBatch,
    w: &WindowSpec,
    normalize: bool,
) -> Result<f64, AnalysisError> {
    if batch.is_empty() {
        return Err(AnalysisError::EmptyBatch);
    }
    case1_from_scalars(&integrate_area(batch, w)?, normalize)
}

fn fractional_shift(x: &[f64], shift_samples: f64) -> Vec<f64> {
    // y[j] = x(j + shift) by a phase ramp on the zero-padded spectrum
    let n = (2 * x.len()).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::default());
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = if k < n / 2 {
            k as f64
        } else if k == n / 2 {
            0.0
        } else {
            k as f64 - n as f64
        };
        *b *= Complex64::from_polar(1.0 / n as f64, TAU * kk * shift_samples / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf[..x.len()].iter().map(|c| c.re).collect()
}

/// `∫_{t1}^{t2} (i_T(t) + g·i_R(t + ΔT_e))² dt` for one shot.
pub fn pointwise_shot(
    t: &Trace,
    r: &Trace,
    w: &WindowSpec,
    delay: DelayMode,
    r_gain: f64,
) -> Result<f64, AnalysisError> {
    let fs = t.sample_rate();
    if (fs - r.sample_rate()).abs() > 1e-12 * fs {
        return Err(AnalysisError::GridMismatch(format!(
            "T sampled at {:e} Hz, R at {:e} Hz",
            fs,
            r.sample_rate()
        )));
    }
    let range = w.sample_range(t, 0.0)?;
    // index in R of the sample at T time t_i + ΔT_e
    let exact = (t.t0() + w.electronic_delay - r.t0()) * fs;
    let offset = exact.round();
    let shifted;
    let r_samples: &[f64] = match delay {
        DelayMode::Nearest => r.samples(),
        DelayMode::Fractional => {
            shifted = fractional_shift(r.samples(), exact - offset);
            &shifted
        }
    };
    let first = range.start as f64 + offset;
    let last = range.end as f64 + offset;
    if first < 0.0 || last > r.len() as f64 {
        return Err(AnalysisError::Range(format!(
            "delayed window [{:e}, {:e}) s outside the R record",
            w.start + w.electronic_delay,
            w.end + w.electronic_delay
        )));
    }
    let off = offset as isize;
    Ok(range
        .map(|i| {
            let v = t.samples()[i] + r_gain * r_samples[(i as isize + off) as usize];
            v * v
        })
        .sum::<f64>()
        * t.dt())
}

/// Point-wise recovery with whole-sample delay compensation and no
/// intensity normalization.
pub fn case2_power(batch: &ShotBatch, w: &WindowSpec) -> Result<f64, AnalysisError> {
    case2_power_with(batch, w, DelayMode::Nearest, false)
}

fn pointwise_gain(
    batch: &ShotBatch,
    w: &WindowSpec,
    normalize: bool,
) -> Result<f64, AnalysisError> {
    if !normalize {
        return Ok(1.0);
    }
    let energy = |tr: &Trace, off: f64| -> Result<f64, AnalysisError> {
        let range = w.sample_range(tr, off)?;
        Ok(tr.samples()[range].iter().map(|v| v * v).sum::<f64>())
    };
    let mut et = 0.0;
    let mut er = 0.0;
    for s in &batch.shots {
        et += energy(&s.t, 0.0)?;
        er += energy(&s.r, w.electronic_delay)?;
    }
    let g = if er > 0.0 && et > 0.0 {
        (et / er).sqrt()
    } else {
        1.0
    };
    log::debug!("case II normalization: R record scaled by {g:.6}");
    Ok(g)
}

pub fn case2_power_with(
    batch: &ShotBatch,
    w: &WindowSpec,
    delay: DelayMode,
    normalize: bool,
) -> Result<f64, AnalysisError> {
    let p = shot_powers(batch, w, &PipelineMode::Pointwise { delay, normalize })?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

/// Per-shot terms whose mean is the batch power: `(i_T^k + i_R^k)²` for
/// area integration, `∫(i_T + i_R)² dt` for point-wise addition.
pub fn shot_powers(
    batch: &ShotBatch,
    w: &WindowSpec,
    mode: &PipelineMode,
) -> Result<Vec<f64>, AnalysisError> {
    if batch.is_empty() {
        return Err(AnalysisError::EmptyBatch);
    }
    match *mode {
        PipelineMode::Area { normalize } => {
            let s = integrate_area(batch, w)?;
            let g = if normalize {
                balance_factor(&s.t, &s.r)
            } else {
                1.0
            };
            Ok(s.t
                .iter()
                .zip(&s.r)
                .map(|(a, b)| (a + g * b).powi(2))
                .collect())
        }
        PipelineMode::Pointwise { delay, normalize } => {
            let g = pointwise_gain(batch, w, normalize)?;
            log::debug!(
                "case II delay residual {:.3e} s ({:?})",
                w.delay_residual(batch.sample_rate()),
                delay
            );
            batch
                .shots
                .iter()
                .map(|s| pointwise_shot(&s.t, &s.r, w, delay, g))
                .collect()
        }
    }
}

/// Mean power of a batch under the chosen pipeline.
pub fn batch_power(
    batch: &ShotBatch,
    w: &WindowSpec,
    mode: &PipelineMode,
) -> Result<f64, AnalysisError> {
    match *mode {
        PipelineMode::Area { normalize } => case1_power(batch, w, normalize),
        PipelineMode::Pointwise { delay, normalize } => {
            case2_power_with(batch, w, delay, normalize)
        }
    }
}
