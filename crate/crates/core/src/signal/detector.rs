use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{invalid, SignalError};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Impulse response family of the balanced detector. Every family has unit
/// DC gain; the overall scale is carried by [`DetectorModel::gain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DetectorResponse {
    /// Ideal detector, `k(t) = δ(t)`.
    Delta,
    /// Gaussian low-pass whose power response `|H(f)|²` is a gaussian of RMS
    /// `bandwidth_hz`, i.e. `H(f) = exp(-f² / (4·bandwidth²))`.
    GaussianLowpass { bandwidth_hz: f64 },
    /// Sampled kernel at the trace rate; tap `j` acts at lag `(j − origin)·Δt`.
    Tabulated { taps: Vec<f64>, origin: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub response: DetectorResponse,
    /// Root `k` of the detector response constant `K = k²`.
    pub gain: f64,
    pub sample_rate: f64,
    /// RMS of the additive white noise, per sample, in current units.
    pub noise_rms: f64,
}

impl DetectorModel {
    pub fn ideal(sample_rate: f64) -> Self {
        Self {
            response: DetectorResponse::Delta,
            gain: 1.0,
            sample_rate,
            noise_rms: 0.0,
        }
    }

    pub fn gaussian(bandwidth_hz: f64, sample_rate: f64) -> Self {
        Self {
            response: DetectorResponse::GaussianLowpass { bandwidth_hz },
            ..Self::ideal(sample_rate)
        }
    }

    pub fn with_noise(mut self, noise_rms: f64) -> Self {
        self.noise_rms = noise_rms;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(invalid("detector sample rate must be positive"));
        }
        if !self.gain.is_finite() {
            return Err(invalid("detector gain must be finite"));
        }
        if !(self.noise_rms >= 0.0) || !self.noise_rms.is_finite() {
            return Err(invalid(
                "detector noise RMS must be finite and non-negative",
            ));
        }
        match &self.response {
            DetectorResponse::Delta => {}
            DetectorResponse::GaussianLowpass { bandwidth_hz } => {
                if !(*bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
                    return Err(invalid("detector bandwidth must be positive"));
                }
            }
            DetectorResponse::Tabulated { taps, origin } => {
                if taps.is_empty() || *origin >= taps.len() {
                    return Err(invalid(
                        "tabulated kernel needs taps and origin < taps.len()",
                    ));
                }
                let sum: f64 = taps.iter().sum();
                if taps.iter().any(|t| !t.is_finite()) || sum == 0.0 {
                    return Err(invalid(
                        "tabulated kernel must be finite with non-zero DC sum",
                    ));
                }
            }
        }
        Ok(())
    }

    /// RMS bandwidth of `|H|²` in Hz; infinite for the ideal detector.
    pub fn bandwidth_hz(&self) -> f64 {
        match &self.response {
            DetectorResponse::Delta => f64::INFINITY,
            DetectorResponse::GaussianLowpass { bandwidth_hz } => *bandwidth_hz,
            DetectorResponse::Tabulated { .. } => {
                // second moment of |H|² over the Nyquist band
                let n = 4096;
                let nyq = 0.5 * self.sample_rate;
                let (mut m0, mut m2) = (0.0, 0.0);
                for i in 0..n {
                    let f = nyq * i as f64 / n as f64;
                    let p = self.power_response(f);
                    m0 += p;
                    m2 += p * f * f;
                }
                (m2 / m0).sqrt()
            }
        }
    }

    /// Transfer function `H(f)` with `H(0) = 1`.
    pub fn transfer(&self, f_hz: f64) -> Complex64 {
        match &self.response {
            DetectorResponse::Delta => Complex64::new(1.0, 0.0),
            DetectorResponse::GaussianLowpass { bandwidth_hz } => Complex64::new(
                (-f_hz * f_hz / (4.0 * bandwidth_hz * bandwidth_hz)).exp(),
                0.0,
            ),
            DetectorResponse::Tabulated { taps, origin } => {
                let sum: f64 = taps.iter().sum();
                let w = -2.0 * PI * f_hz / self.sample_rate;
                taps.iter()
                    .enumerate()
                    .map(|(j, &k)| Complex64::from_polar(k, w * (j as f64 - *origin as f64)))
                    .sum::<Complex64>()
                    / sum
            }
        }
    }

    /// Power response `|H(f)|²`.
    pub fn power_response(&self, f_hz: f64) -> f64 {
        self.transfer(f_hz).norm_sqr()
    }

    /// RMS time width of the gaussian kernel `k(t)`.
    pub fn kernel_rms_time(&self) -> f64 {
        match &self.response {
            DetectorResponse::Delta => 0.0,
            DetectorResponse::GaussianLowpass { bandwidth_hz } => {
                1.0 / (2.0 * PI * SQRT_2 * bandwidth_hz)
            }
            DetectorResponse::Tabulated { taps, origin } => {
                taps.len().max(*origin + 1) as f64 / self.sample_rate
            }
        }
    }

    /// Half-width (seconds) beyond which the kernel is negligible.
    pub fn kernel_extent(&self) -> f64 {
        match &self.response {
            DetectorResponse::Delta => 0.0,
            DetectorResponse::GaussianLowpass { .. } => 7.0 * self.kernel_rms_time(),
            DetectorResponse::Tabulated { taps, origin } => {
                (*origin).max(taps.len() - origin) as f64 / self.sample_rate
            }
        }
    }

    /// Linear convolution of `x` with the unit-DC-gain kernel, same length as
    /// the input. Output beyond the record is discarded.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        match &self.response {
            DetectorResponse::Delta => x.to_vec(),
            DetectorResponse::GaussianLowpass { bandwidth_hz } => {
                let pad = (self.kernel_extent() * self.sample_rate).ceil() as usize + 1;
                let n_fft = (x.len() + 2 * pad).next_power_of_two();
                let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
                for (b, &v) in buf[pad..pad + x.len()].iter_mut().zip(x) {
                    b.re = v;
                }
                let s = *bandwidth_hz;
                let df = self.sample_rate / n_fft as f64;
                PLANNER.with(|p| {
                    let mut planner = p.borrow_mut();
                    planner.plan_fft_forward(n_fft).process(&mut buf);
                    for (k, b) in buf.iter_mut().enumerate() {
                        let kk = if k <= n_fft / 2 {
                            k as f64
                        } else {
                            k as f64 - n_fft as f64
                        };
                        let f = kk * df;
                        *b *= (-f * f / (4.0 * s * s)).exp() / n_fft as f64;
                    }
                    planner.plan_fft_inverse(n_fft).process(&mut buf);
                });
                buf[pad..pad + x.len()].iter().map(|c| c.re).collect()
            }
            DetectorResponse::Tabulated { taps, origin } => {
                let sum: f64 = taps.iter().sum();
                let n = x.len() as isize;
                (0..n)
                    .map(|i| {
                        taps.iter()
                            .enumerate()
                            .filter_map(|(j, &k)| {
                                let src = i - (j as isize - *origin as isize);
                                (0..n).contains(&src).then(|| k * x[src as usize])
                            })
                            .sum::<f64>()
                            / sum
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dc_passes_with_unit_gain() {
        let det = DetectorModel::gaussian(5e6, 100e6);
        let x = vec![1.0; 4000];
        let y = det.filter(&x);
        // far from the record edges the output equals the input
        assert_relative_eq!(y[2000], 1.0, max_relative = 1e-12);
        let tab = DetectorModel {
            response: DetectorResponse::Tabulated {
                taps: vec![1.0, 2.0, 1.0],
                origin: 1,
            },
            ..DetectorModel::ideal(100e6)
        };
        assert_relative_eq!(tab.filter(&x)[10], 1.0, max_relative = 1e-12);
        assert_relative_eq!(tab.transfer(0.0).re, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_filter_attenuates_tone_by_transfer() {
        let fs = 100e6;
        let det = DetectorModel::gaussian(20e6, fs);
        let f0 = 15e6;
        let x: Vec<f64> = (0..8192)
            .map(|i| (2.0 * PI * f0 * i as f64 / fs).cos())
            .collect();
        let y = det.filter(&x);
        let mid = &y[2000..6000];
        let amp = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_relative_eq!(amp, det.transfer(f0).re, max_relative = 1e-3);
    }

    #[test]
    fn tabulated_bandwidth_is_finite() {
        let det = DetectorModel {
            response: DetectorResponse::Tabulated {
                taps: vec![0.25, 0.5, 0.25],
                origin: 1,
            },
            ..DetectorModel::ideal(100e6)
        };
        assert!(det.bandwidth_hz().is_finite());
        assert!(det.validate().is_ok());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DetectorModel::gaussian(0.0, 1e8).validate().is_err());
        assert!(DetectorModel::ideal(-1.0).validate().is_err());
        assert!(DetectorModel::ideal(1e8)
            .with_noise(-1.0)
            .validate()
            .is_err());
    }
}
