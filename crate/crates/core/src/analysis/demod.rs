use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::signal::Trace;

/// Result of fitting `A·cos(δω·t − φ)` to a trace segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demodulation {
    pub amplitude: f64,
    /// In `[0, 2π)`.
    pub phase: f64,
    pub residual_rms: f64,
    /// Amplitude below three standard errors of the fit.
    pub low_snr: bool,
    /// The sine column was degenerate (e.g. `δω ≈ 0`); only the in-phase
    /// component was fitted, so the phase is 0 or π.
    pub ill_conditioned: bool,
}

/// Least-squares projection of the samples in `[start, end)` onto
/// `cos(δω·t)` and `sin(δω·t)`, with `t` the absolute trace time.
pub fn demodulate(
    trace: &Trace,
    detuning: f64,
    start: f64,
    end: f64,
) -> Result<Demodulation, AnalysisError> {
    let fs = trace.sample_rate();
    let i0 = ((start - trace.t0()) * fs).round().max(0.0) as usize;
    let i1 = (((end - trace.t0()) * fs).round().max(0.0) as usize).min(trace.len());
    if i1 < i0 + 4 {
        return Err(AnalysisError::Range(format!(
            "demodulation window [{start:e}, {end:e}) s holds fewer than 4 samples"
        )));
    }
    let x = &trace.samples()[i0..i1];
    let (mut cc, mut ss, mut cs, mut xc, mut xs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, &v) in x.iter().enumerate() {
        let (s, c) = (detuning * trace.time(i0 + j)).sin_cos();
        cc += c * c;
        ss += s * s;
        cs += c * s;
        xc += v * c;
        xs += v * s;
    }
    let det = cc * ss - cs * cs;
    let n = x.len() as f64;
    let ill_conditioned = det <= 1e-10 * n * n;
    let (alpha, beta) = if ill_conditioned {
        (xc / cc, 0.0)
    } else {
        ((ss * xc - cs * xs) / det, (cc * xs - cs * xc) / det)
    };
    let sse: f64 = x
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let (s, c) = (detuning * trace.time(i0 + j)).sin_cos();
            (v - alpha * c - beta * s).powi(2)
        })
        .sum();
    let dof = (n - 2.0).max(1.0);
    let residual_rms = (sse / dof).sqrt();
    let amplitude = alpha.hypot(beta);
    let stderr = residual_rms * (2.0 / n).sqrt();
    Ok(Demodulation {
        amplitude,
        phase: beta.atan2(alpha).rem_euclid(TAU),
        residual_rms,
        low_snr: amplitude <= 3.0 * stderr,
        ill_conditioned,
    })
}
