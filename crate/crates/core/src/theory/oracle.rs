use std::f64::consts::{FRAC_PI_2, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::TheoryError;
use crate::signal::{DetectorResponse, PulseProfile, ShotConfig};

/// Which photocurrent statistic the oracle reproduces. Windows are in the
/// T record's time frame; the R record is read `delay` seconds later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum OracleMode {
    /// `(∫_{t1}^{t2} i_T dt + ∫_{t1+D}^{t2+D} i_R dt)²`.
    Area { start: f64, end: f64, delay: f64 },
    /// `∫_{t1}^{t2} (i_T(t) + i_R(t + D))² dt`.
    Pointwise { start: f64, end: f64, delay: f64 },
}

/// Whether the oracle keeps the terms that depend on the absolute shot
/// phase or averages them out over a uniform common phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseAverage {
    PerShot,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub phase: PhaseAverage,
    /// Accepted relative change between successive step halvings.
    pub tolerance: f64,
    pub max_refinements: usize,
    /// Starting integration step; `None` picks one from the sample rate,
    /// pulse and kernel widths.
    pub initial_step: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            phase: PhaseAverage::PerShot,
            tolerance: 1e-7,
            max_refinements: 8,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub power: f64,
    /// Step of the final (finest) evaluation.
    pub step: f64,
    /// Relative change against the previous step.
    pub change: f64,
    pub refinements: usize,
}

struct Fields {
    x_t: (f64, PulseProfile, f64),
    x_r: (f64, PulseProfile, f64),
    detuning: f64,
    storage: f64,
}

impl Fields {
    fn new(cfg: &ShotConfig, common_shift: f64) -> Result<Self, TheoryError> {
        let (a_t, a_r) = cfg.normalized_profiles()?;
        let f = &cfg.fields;
        Ok(Self {
            x_t: (f.intensity_t.sqrt(), a_t, f.phase_t(&cfg.lo) + common_shift),
            x_r: (f.intensity_r.sqrt(), a_r, f.phase_r(&cfg.lo) + common_shift),
            detuning: cfg.lo.detuning,
            storage: cfg.storage_time,
        })
    }

    fn t(&self, tau: f64) -> f64 {
        let (e, a, phi) = &self.x_t;
        2.0 * e * a.amplitude(tau) * (self.detuning * tau - phi).cos()
    }

    /// `a_r` already carries the storage delay.
    fn r(&self, tau: f64) -> f64 {
        let (e, a, phi) = &self.x_r;
        2.0 * e * a.amplitude(tau) * (self.detuning * (tau - self.storage) - phi).cos()
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Power and the T-only plus R-only scale used for the convergence test.
fn evaluate(cfg: &ShotConfig, mode: &OracleMode, h: f64, fields: &Fields) -> (f64, f64) {
    let sigma = cfg.detector.kernel_rms_time();
    let margin = 10.0 * sigma;
    let g2 = (cfg.detector.gain * cfg.lo.amplitude).powi(2);
    match *mode {
        OracleMode::Area { start, end, delay } => {
            // i^k = g|ℰ|·∫X(τ)·W(τ)dτ with W(τ) = ∫_window k(t − τ) dt
            let weight = |tau: f64, lo: f64, hi: f64| -> f64 {
                if sigma == 0.0 {
                    if tau >= lo && tau <= hi {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let s = SQRT_2 * sigma;
                    0.5 * (erf((hi - tau) / s) - erf((lo - tau) / s))
                }
            };
            let integrate = |lo: f64, hi: f64, x: &dyn Fn(f64) -> f64| -> f64 {
                let a = lo - margin;
                let n = ((hi + margin - a) / h).ceil() as usize + 1;
                let v: Vec<f64> = (0..n)
                    .map(|i| {
                        let tau = a + i as f64 * h;
                        x(tau) * weight(tau, lo, hi)
                    })
                    .collect();
                trapezoid(&v, h)
            };
            let it = integrate(start, end, &|t| fields.t(t));
            let ir = integrate(start + delay, end + delay, &|t| fields.r(t));
            (g2 * (it + ir).powi(2), g2 * (it * it + ir * ir))
        }
        OracleMode::Pointwise { start, end, delay } => {
            let a = start - margin;
            let n = ((end + margin - a) / h).ceil() as usize + 1;
            let tau = |i: usize| a + i as f64 * h;
            let yt: Vec<f64> = (0..n).map(|i| fields.t(tau(i))).collect();
            let yr: Vec<f64> = (0..n).map(|i| fields.r(tau(i) + delay)).collect();
            if sigma == 0.0 {
                let sq = |f: &dyn Fn(usize) -> f64| -> f64 {
                    let v: Vec<f64> = (0..n)
                        .map(|i| {
                            if tau(i) >= start && tau(i) <= end {
                                f(i)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    trapezoid(&v, h)
                };
                let p = sq(&|i| (yt[i] + yr[i]).powi(2));
                let s = sq(&|i| yt[i] * yt[i] + yr[i] * yr[i]);
                return (g2 * p, g2 * s);
            }
            // ∬Y(τ)Y(τ')·𝒦(τ − τ')·½[erf((t2 − m)/σ) − erf((t1 − m)/σ)], m = (τ + τ')/2
            let band = (12.0 * sigma / h).ceil() as usize;
            let kern = |d: f64| {
                (-d * d / (4.0 * sigma * sigma)).exp() / (2.0 * sigma * std::f64::consts::PI.sqrt())
            };
            let kk: Vec<f64> = (0..=band).map(|j| kern(j as f64 * h)).collect();
            // window factor depends on τ_i + τ_j only
            let wsum: Vec<f64> = (0..2 * n)
                .map(|ij| {
                    let m = a + 0.5 * ij as f64 * h;
                    0.5 * (erf((end - m) / sigma) - erf((start - m) / sigma))
                })
                .collect();
            let (mut p, mut s) = (0.0, 0.0);
            for i in 0..n {
                let yi = yt[i] + yr[i];
                if yt[i] == 0.0 && yr[i] == 0.0 {
                    continue;
                }
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(n - 1);
                for j in lo..=hi {
                    let k = kk[i.abs_diff(j)] * wsum[i + j];
                    p += yi * (yt[j] + yr[j]) * k;
                    s += (yt[i] * yt[j] + yr[i] * yr[j]) * k;
                }
            }
            (g2 * p * h * h, g2 * s * h * h)
        }
    }
}

/// Brute-force photocurrent power of one noiseless shot.
///
/// The double time integral over the detector kernel is evaluated on a
/// dense grid from the continuous pulse envelopes, without assuming either
/// detector limit. The step is halved until successive results agree to
/// `tolerance` relative to the T-only plus R-only power.
pub fn oracle_power(
    cfg: &ShotConfig,
    mode: &OracleMode,
    opts: &OracleOptions,
) -> Result<OracleResult, TheoryError> {
    cfg.detector.validate()?;
    cfg.fields.validate()?;
    if matches!(cfg.detector.response, DetectorResponse::Tabulated { .. }) {
        return Err(TheoryError::Unsupported(
            "oracle needs a delta or gaussian detector kernel".into(),
        ));
    }
    let (start, end) = match *mode {
        OracleMode::Area { start, end, .. } | OracleMode::Pointwise { start, end, .. } => {
            (start, end)
        }
    };
    if !(end > start) {
        return Err(TheoryError::InvalidParameter(
            "oracle window needs end > start".into(),
        ));
    }
    let sigma = cfg.detector.kernel_rms_time();
    let mut h = opts.initial_step.unwrap_or_else(|| {
        let dt = 1.0 / cfg.detector.sample_rate;
        let mut h = 0.5 * dt;
        if sigma > 0.0 {
            h = h.min(0.5 * sigma);
        }
        h
    });

    let phases: &[f64] = match opts.phase {
        PhaseAverage::PerShot => &[0.0],
        PhaseAverage::Ensemble => &[0.0, FRAC_PI_2],
    };
    let fields: Vec<Fields> = phases
        .iter()
        .map(|&p| Fields::new(cfg, p))
        .collect::<Result<_, _>>()?;
    // the power is quadratic in (cos φ, sin φ) of the common phase, so two
    // quadrature-spaced evaluations average out its 2φ dependence exactly
    let eval = |h: f64| -> (f64, f64) {
        let n = fields.len() as f64;
        fields.iter().fold((0.0, 0.0), |(p, s), f| {
            let (pp, ss) = evaluate(cfg, mode, h, f);
            (p + pp / n, s + ss / n)
        })
    };

    let (mut prev, _) = eval(h);
    let mut change = f64::INFINITY;
    for refinements in 1..=opts.max_refinements {
        h *= 0.5;
        let (p, scale) = eval(h);
        change = (p - prev).abs() / scale.max(p.abs()).max(f64::MIN_POSITIVE);
        if change < opts.tolerance {
            return Ok(OracleResult {
                power: p,
                step: h,
                change,
                refinements,
            });
        }
        prev = p;
    }
    Err(TheoryError::RefineGrid {
        change,
        refinements: opts.max_refinements,
        step: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{DetectorModel, FieldPair, LoConfig, TraceLabel};
    use crate::theory::mean_power_analytic;
    use approx::assert_relative_eq;

    fn shot(detuning_hz: f64, storage: f64, spin: f64) -> ShotConfig {
        let p = PulseProfile::gaussian(2e-6, 0.3e-6);
        ShotConfig {
            fields: FieldPair {
                intensity_t: 1.0,
                intensity_r: 0.6,
                common_phase: 0.4,
                accumulated_phase: spin,
                profile_t: p.clone(),
                profile_r: p,
            },
            lo: LoConfig::new(1.0, detuning_hz),
            detector: DetectorModel::ideal(100e6),
            storage_time: storage,
            window_start: 0.0,
            window_duration: 4e-6 + storage,
            shot_index: 0,
            labels: (TraceLabel::T, TraceLabel::R),
            seed: 0,
        }
    }

    #[test]
    fn matched_dc_pulses_match_analytic_power() {
        for spin in [0.0, 1.0, 2.5, std::f64::consts::PI] {
            let cfg = shot(0.0, 5e-6, spin);
            let mode = OracleMode::Pointwise {
                start: 0.0,
                end: 4e-6,
                delay: 5e-6,
            };
            let opts = OracleOptions {
                phase: PhaseAverage::Ensemble,
                ..Default::default()
            };
            let p = oracle_power(&cfg, &mode, &opts).unwrap().power;
            let expected = mean_power_analytic(1.0, 0.6, 0.0, 5e-6, spin, 1.0, 1.0);
            assert_relative_eq!(p, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn uncompensated_long_storage_has_no_cross_term() {
        let cfg = shot(0.0, 20e-6, 1.0);
        let mode = OracleMode::Pointwise {
            start: 0.0,
            end: 24e-6,
            delay: 0.0,
        };
        let opts = OracleOptions {
            phase: PhaseAverage::Ensemble,
            ..Default::default()
        };
        let p = oracle_power(&cfg, &mode, &opts).unwrap().power;
        // self terms only: 2(I_T + I_R)
        assert_relative_eq!(p, 2.0 * 1.6, max_relative = 1e-6);
    }

    #[test]
    fn step_halving_converges() {
        let mut cfg = shot(3e6, 5e-6, 0.7);
        cfg.detector = DetectorModel::gaussian(50e6, 100e6);
        let mode = OracleMode::Pointwise {
            start: 0.0,
            end: 4e-6,
            delay: 5e-6,
        };
        let opts = OracleOptions::default();
        let r = oracle_power(&cfg, &mode, &opts).unwrap();
        let finer = OracleOptions {
            initial_step: Some(r.step),
            ..opts
        };
        let r2 = oracle_power(&cfg, &mode, &finer).unwrap();
        assert!(((r2.power - r.power) / r.power).abs() < 1e-6);
    }

    #[test]
    fn area_with_slow_kernel_recovers_full_area() {
        let mut cfg = shot(0.0, 5e-6, 0.0);
        cfg.fields.intensity_r = 0.0;
        cfg.fields.common_phase = 0.0;
        cfg.detector = DetectorModel::gaussian(2e6, 100e6);
        let wide = OracleMode::Area {
            start: -20e-6,
            end: 25e-6,
            delay: 5e-6,
        };
        let p = oracle_power(&cfg, &wide, &OracleOptions::default())
            .unwrap()
            .power;
        // (2∫a)² for a normalized gaussian is 4·σ·2√π
        let area = 2.0 * (2.0 * std::f64::consts::PI.sqrt() * 0.3e-6).sqrt();
        assert_relative_eq!(p, area * area, max_relative = 1e-6);
    }

    #[test]
    fn tabulated_kernel_is_unsupported() {
        let mut cfg = shot(0.0, 5e-6, 0.0);
        cfg.detector.response = DetectorResponse::Tabulated {
            taps: vec![1.0],
            origin: 0,
        };
        let mode = OracleMode::Area {
            start: 0.0,
            end: 4e-6,
            delay: 5e-6,
        };
        assert!(matches!(
            oracle_power(&cfg, &mode, &OracleOptions::default()),
            Err(TheoryError::Unsupported(_))
        ));
    }
}
