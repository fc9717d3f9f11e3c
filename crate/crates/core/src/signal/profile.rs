use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{invalid, SignalError, TimeGrid};

/// Un-normalized temporal envelope of one optical pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PulseShape {
    /// `exp(-(t - center)² / (2·rms_width²))`.
    Gaussian { center: f64, rms_width: f64 },
    /// Gaussian of RMS `rise` convolved with a one-sided exponential of time
    /// constant `fall`; `center` is the mean of the gaussian component.
    ExpModGaussian { center: f64, rise: f64, fall: f64 },
    /// Linearly interpolated samples `values[i]` at `start + i·step`,
    /// zero outside the table.
    Tabulated {
        start: f64,
        step: f64,
        values: Vec<f64>,
    },
}

impl PulseShape {
    pub fn gaussian(center: f64, rms_width: f64) -> Self {
        PulseShape::Gaussian { center, rms_width }
    }

    /// Gaussian with the given full width at half maximum.
    pub fn gaussian_fwhm(center: f64, fwhm: f64) -> Self {
        PulseShape::gaussian(center, crate::theory::fwhm_to_rms(fwhm))
    }

    pub fn exp_mod_gaussian(center: f64, rise: f64, fall: f64) -> Self {
        PulseShape::ExpModGaussian { center, rise, fall }
    }

    pub fn envelope(&self, t: f64) -> f64 {
        match *self {
            PulseShape::Gaussian { center, rms_width } => {
                let x = (t - center) / rms_width;
                (-0.5 * x * x).exp()
            }
            PulseShape::ExpModGaussian { center, rise, fall } => emg(t, center, rise, fall),
            PulseShape::Tabulated {
                start,
                step,
                ref values,
            } => {
                let pos = (t - start) / step;
                if !(pos >= 0.0) || values.is_empty() {
                    return 0.0;
                }
                let i = pos.floor() as usize;
                if i + 1 >= values.len() {
                    return if i == values.len() - 1 && pos == i as f64 {
                        values[i]
                    } else {
                        0.0
                    };
                }
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Same shape delayed by `delay` seconds.
    pub fn shifted(&self, delay: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            PulseShape::Gaussian { center, .. } | PulseShape::ExpModGaussian { center, .. } => {
                *center += delay
            }
            PulseShape::Tabulated { start, .. } => *start += delay,
        }
        out
    }

    /// Interval outside which the envelope stays below `level` times its
    /// maximum. Conservative for the exp-modified gaussian.
    pub fn extent(&self, level: f64) -> (f64, f64) {
        let k = (-2.0 * level.ln()).max(0.0).sqrt();
        match *self {
            PulseShape::Gaussian { center, rms_width } => {
                (center - k * rms_width, center + k * rms_width)
            }
            PulseShape::ExpModGaussian { center, rise, fall } => (
                center - k * rise,
                center + k * rise + fall * (1.0 - level.ln()),
            ),
            PulseShape::Tabulated {
                start,
                step,
                ref values,
            } => (start, start + step * values.len().saturating_sub(1) as f64),
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        match self {
            PulseShape::Gaussian { center, rms_width } => {
                if !center.is_finite() || !(*rms_width > 0.0) || !rms_width.is_finite() {
                    return Err(invalid(
                        "gaussian pulse needs a finite center and rms_width > 0",
                    ));
                }
            }
            PulseShape::ExpModGaussian { center, rise, fall } => {
                if !center.is_finite() || !(*rise > 0.0) || !(*fall > 0.0) {
                    return Err(invalid("exp-modified gaussian needs rise > 0 and fall > 0"));
                }
            }
            PulseShape::Tabulated {
                start,
                step,
                values,
            } => {
                if !start.is_finite() || !(*step > 0.0) {
                    return Err(invalid("tabulated pulse needs a finite start and step > 0"));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid(
                        "tabulated pulse values must be finite and non-negative",
                    ));
                }
            }
        }
        Ok(())
    }
}

// exp(-(t-μ)²/2σ²)·erfcx(z) == exp(e)·erfc(z); the first form avoids overflow
// on the leading edge where z is large.
fn emg(t: f64, mu: f64, sigma: f64, tau: f64) -> f64 {
    let lambda = 1.0 / tau;
    let z = (mu + lambda * sigma * sigma - t) / (SQRT_2 * sigma);
    if z < 5.0 {
        let e = lambda * (mu - t) + 0.5 * lambda * lambda * sigma * sigma;
        e.exp() * erfc(z)
    } else {
        let g = -0.5 * ((t - mu) / sigma).powi(2);
        g.exp() * erfcx_large(z)
    }
}

/// Scaled complementary error function `exp(z²)·erfc(z)` for `z ≥ 5`,
/// evaluated by the Laplace continued fraction.
fn erfcx_large(z: f64) -> f64 {
    let mut f = z;
    for n in (1..=60).rev() {
        f = z + (n as f64 * 0.5) / f;
    }
    1.0 / (PI.sqrt() * f)
}

/// A pulse shape together with the amplitude scale that normalizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    shape: PulseShape,
    scale: f64,
}

impl PulseProfile {
    pub fn new(shape: PulseShape) -> Self {
        Self { shape, scale: 1.0 }
    }

    pub fn gaussian(center: f64, rms_width: f64) -> Self {
        Self::new(PulseShape::gaussian(center, rms_width))
    }

    pub fn shape(&self) -> &PulseShape {
        &self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `a(t)`.
    #[inline]
    pub fn amplitude(&self, t: f64) -> f64 {
        self.scale * self.shape.envelope(t)
    }

    pub fn shifted(&self, delay: f64) -> Self {
        Self {
            shape: self.shape.shifted(delay),
            scale: self.scale,
        }
    }

    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.times().map(|t| self.amplitude(t)).collect()
    }

    /// Discrete `Σ a²(t_i)·Δt` over the grid.
    pub fn energy(&self, grid: &TimeGrid) -> f64 {
        grid.times().map(|t| self.amplitude(t).powi(2)).sum::<f64>() * grid.dt()
    }

    /// Rescale so that the discrete `Σ a²·Δt` over `grid` equals one.
    pub fn normalized(&self, grid: &TimeGrid) -> Result<Self, SignalError> {
        self.shape.validate()?;
        let mut sum = 0.0;
        for t in grid.times() {
            let a = self.shape.envelope(t);
            if !a.is_finite() {
                return Err(SignalError::NonFinite(t));
            }
            sum += a * a;
        }
        let energy = sum * grid.dt();
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(SignalError::NormalizationImpossible);
        }
        Ok(Self {
            shape: self.shape.clone(),
            scale: 1.0 / energy.sqrt(),
        })
    }

    /// Largest `|a(t_i)|` on the grid.
    pub fn peak(&self, grid: &TimeGrid) -> f64 {
        grid.times()
            .map(|t| self.amplitude(t).abs())
            .fold(0.0, f64::max)
    }

    /// Envelope level at the window edges relative to the on-grid peak.
    pub fn edge_level(&self, grid: &TimeGrid) -> f64 {
        if grid.len == 0 {
            return 1.0;
        }
        let peak = self.peak(grid);
        if peak == 0.0 {
            return 1.0;
        }
        let first = self.amplitude(grid.time(0)).abs();
        let last = self.amplitude(grid.time(grid.len - 1)).abs();
        first.max(last) / peak
    }

    /// First and last grid times where `|a| > level · peak`.
    pub fn support(&self, grid: &TimeGrid, level: f64) -> Option<(f64, f64)> {
        let peak = self.peak(grid);
        if peak == 0.0 {
            return None;
        }
        let above: Vec<usize> = (0..grid.len)
            .filter(|&i| self.amplitude(grid.time(i)).abs() > level * peak)
            .collect();
        Some((grid.time(*above.first()?), grid.time(*above.last()?)))
    }

    /// RMS width (Hz) of the pulse power spectrum `|ã(f)|²`, from
    /// `(1/2π)·sqrt(∫a'² / ∫a²)` with central differences on the grid.
    pub fn spectral_rms_hz(&self, grid: &TimeGrid) -> f64 {
        let a = self.sample(grid);
        if a.len() < 3 {
            return 0.0;
        }
        let dt = grid.dt();
        let num: f64 = a
            .windows(3)
            .map(|w| ((w[2] - w[0]) / (2.0 * dt)).powi(2))
            .sum();
        let den: f64 = a.iter().map(|v| v * v).sum();
        if den == 0.0 {
            return 0.0;
        }
        (num / den).sqrt() / (2.0 * PI)
    }
}

/// Returns `p` rescaled so that the discrete `∫a² dt` over `grid` is one.
pub fn normalize_profile(p: &PulseProfile, grid: &TimeGrid) -> Result<PulseProfile, SignalError> {
    p.normalized(grid)
}
