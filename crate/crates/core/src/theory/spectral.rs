use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TheoryError;
use crate::signal::{DetectorModel, DetectorResponse, PulseProfile, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// `𝒦̃`, transform of the detector autocorrelation `∫k(t)k(t+τ)dt`.
    DetectorResponse,
    /// `𝒜̃_TR = ã_T·conj(ã_R)`, transform of the pulse cross-correlation.
    PulseCrossSpectrum,
}

/// Complex spectrum on the uniform grid `f_i = f0 + i·df` (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    f0: f64,
    df: f64,
    values: Vec<Complex64>,
    provenance: Provenance,
}

fn symmetric(df: f64, half: usize) -> (f64, usize) {
    (-(half as f64) * df, 2 * half + 1)
}

impl SpectralFunction {
    pub fn new(
        f0: f64,
        df: f64,
        values: Vec<Complex64>,
        provenance: Provenance,
    ) -> Result<Self, TheoryError> {
        if !(df > 0.0) || !df.is_finite() || !f0.is_finite() {
            return Err(TheoryError::InvalidParameter(
                "spectral grid needs finite f0 and df > 0".into(),
            ));
        }
        if values.is_empty()
            || values
                .iter()
                .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(TheoryError::InvalidParameter(
                "spectral values must be finite and non-empty".into(),
            ));
        }
        Ok(Self {
            f0,
            df,
            values,
            provenance,
        })
    }

    /// A delta of weight `weight` at zero frequency: one bin of height
    /// `weight / df`.
    pub fn delta(weight: f64, df: f64, provenance: Provenance) -> Result<Self, TheoryError> {
        Self::new(0.0, df, vec![Complex64::new(weight / df, 0.0)], provenance)
    }

    /// Unit-integral gaussian of RMS `rms_hz` on `2·half + 1` bins centred on 0.
    pub fn gaussian(
        rms_hz: f64,
        df: f64,
        half: usize,
        provenance: Provenance,
    ) -> Result<Self, TheoryError> {
        let (f0, n) = symmetric(df, half);
        let norm = 1.0 / ((2.0 * PI).sqrt() * rms_hz);
        let values = (0..n)
            .map(|i| {
                let f = f0 + i as f64 * df;
                Complex64::new(norm * (-0.5 * (f / rms_hz).powi(2)).exp(), 0.0)
            })
            .collect();
        Self::new(f0, df, values, provenance)
    }

    /// Detector spectrum `𝒦̃(f) ∝ |H(f)|²`, scaled to unit integral. The ideal
    /// detector gives a unit delta.
    pub fn detector(det: &DetectorModel, df: f64, half: usize) -> Result<Self, TheoryError> {
        if matches!(det.response, DetectorResponse::Delta) {
            return Self::delta(1.0, df, Provenance::DetectorResponse);
        }
        let (f0, n) = symmetric(df, half);
        let raw: Vec<f64> = (0..n)
            .map(|i| det.power_response(f0 + i as f64 * df))
            .collect();
        let total: f64 = raw.iter().sum::<f64>() * df;
        if !(total > 0.0) {
            return Err(TheoryError::InvalidParameter(
                "detector power response integrates to zero".into(),
            ));
        }
        let values = raw
            .iter()
            .map(|&v| Complex64::new(v / total, 0.0))
            .collect();
        Self::new(f0, df, values, Provenance::DetectorResponse)
    }

    /// Pulse cross spectrum `ã_T(f)·conj(ã_R(f))` with
    /// `ã(f) = Σ a(t_i)·exp(−2πi f t_i)·Δt` over the normalized samples.
    /// The range must stay below the grid's Nyquist frequency.
    pub fn pulse_cross(
        a_t: &PulseProfile,
        a_r: &PulseProfile,
        grid: &TimeGrid,
        df: f64,
        half: usize,
    ) -> Result<Self, TheoryError> {
        if half as f64 * df > grid.nyquist() * (1.0 + 1e-12) {
            return Err(TheoryError::InvalidParameter(format!(
                "spectrum reaches {:e} Hz, beyond the grid's Nyquist frequency {:e} Hz",
                half as f64 * df,
                grid.nyquist()
            )));
        }
        let x = a_t.normalized(grid)?.sample(grid);
        let y = a_r.normalized(grid)?.sample(grid);
        let dt = grid.dt();
        let transform = |s: &[f64], f: f64| -> Complex64 {
            s.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| Complex64::from_polar(v * dt, -TAU * f * grid.time(i)))
                .sum()
        };
        let (f0, n) = symmetric(df, half);
        let values = (0..n)
            .map(|i| {
                let f = f0 + i as f64 * df;
                transform(&x, f) * transform(&y, f).conj()
            })
            .collect();
        Self::new(f0, df, values, Provenance::PulseCrossSpectrum)
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.f0 + i as f64 * self.df
    }

    /// `Σ v_i·df`.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.df
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, f: f64) -> Complex64 {
        let pos = (f - self.f0) / self.df;
        let last = (self.values.len() - 1) as f64;
        // tolerate round-off on exact grid points
        let snapped = if (pos - pos.round()).abs() < 1e-9 {
            pos.round()
        } else {
            pos
        };
        if snapped < 0.0 || snapped > last {
            return Complex64::default();
        }
        let i = snapped.floor() as usize;
        let frac = snapped - i as f64;
        if frac == 0.0 || i + 1 >= self.values.len() {
            return self.values[i];
        }
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// `v(−f) = conj(v(f))` within `tol` of the largest magnitude. Requires a
    /// grid symmetric about zero.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.values.len();
        if (self.f0 + self.frequency(n - 1)).abs() > 1e-9 * self.df {
            return false;
        }
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        (0..n).all(|i| (self.values[i] - self.values[n - 1 - i].conj()).norm() <= tol * scale)
    }

    /// RMS width `sqrt(Σ f²|v| / Σ|v|)` about zero.
    pub fn rms_width(&self) -> f64 {
        let (mut m0, mut m2) = (0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let f = self.frequency(i);
            m0 += v.norm();
            m2 += v.norm() * f * f;
        }
        (m2 / m0).sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<(), TheoryError> {
        let rel = (self.df - other.df).abs() / self.df;
        let offset = (self.f0 - other.f0) / self.df;
        if rel > 1e-9 || (offset - offset.round()).abs() > 1e-6 {
            return Err(TheoryError::ResampleRequired(format!(
                "df {:e} vs {:e}, origin offset {offset} bins",
                self.df, other.df
            )));
        }
        Ok(())
    }

    /// `(self ⊛ other)(f) = Σ_j self(f_j)·other(f − f_j)·df`.
    pub fn convolve_at(&self, other: &Self, f: f64) -> Result<Complex64, TheoryError> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| v * other.value_at(f - self.frequency(j)))
            .sum::<Complex64>()
            * self.df)
    }

    /// Full discrete convolution on the combined grid.
    pub fn convolve(&self, other: &Self) -> Result<Self, TheoryError> {
        self.check_compatible(other)?;
        let n = self.len() + other.len() - 1;
        let mut out = vec![Complex64::default(); n];
        for (i, a) in self.values.iter().enumerate() {
            for (j, b) in other.values.iter().enumerate() {
                out[i + j] += a * b * self.df;
            }
        }
        Self::new(self.f0 + other.f0, self.df, out, other.provenance)
    }
}

/// Visibility predicted by the spectral overlap of detector and pulses,
/// `𝒱(δω) = 𝒱₀·𝒜_TR(0)·|C(δω)| / |C(0)|` with `C = 𝒦̃ ⊛ 𝒜̃_TR`.
///
/// With a delta detector this reduces to `𝒱₀·𝒜_TR(0)·|𝒜̃_TR(δω)/𝒜̃_TR(0)|`,
/// and with a delta pulse spectrum to `𝒱₀·𝒜_TR(0)·𝒦̃(δω)/𝒦̃(0)`.
/// `delta_omega` is angular (rad/s).
pub fn visibility_theory(
    k_spec: &SpectralFunction,
    a_spec: &SpectralFunction,
    delta_omega: f64,
    v0: f64,
) -> Result<f64, TheoryError> {
    let f = delta_omega / TAU;
    let c = k_spec.convolve_at(a_spec, f)?;
    let c0 = k_spec.convolve_at(a_spec, 0.0)?;
    if c0.norm() == 0.0 {
        return Ok(0.0);
    }
    let a0 = a_spec.integral().re;
    Ok(v0 * a0 * c.norm() / c0.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::gaussian_overlap;
    use approx::assert_relative_eq;

    #[test]
    fn delta_detector_reproduces_pulse_spectrum() {
        let df = 20e3;
        let k = SpectralFunction::delta(1.0, df, Provenance::DetectorResponse).unwrap();
        let a =
            SpectralFunction::gaussian(2.21e6, df, 800, Provenance::PulseCrossSpectrum).unwrap();
        let f = 4e6;
        let v = visibility_theory(&k, &a, TAU * f, 0.9).unwrap();
        let expected = 0.9 * (-0.5 * (f / 2.21e6f64).powi(2)).exp();
        assert_relative_eq!(v, expected, max_relative = 1e-6);
    }

    #[test]
    fn delta_pulse_spectrum_reproduces_detector() {
        let df = 0.5e6;
        let k = SpectralFunction::gaussian(50e6, df, 800, Provenance::DetectorResponse).unwrap();
        let a = SpectralFunction::delta(0.7, df, Provenance::PulseCrossSpectrum).unwrap();
        let f = 30e6;
        let v = visibility_theory(&k, &a, TAU * f, 1.0).unwrap();
        let expected = 0.7 * (-0.5 * (f / 50e6f64).powi(2)).exp();
        assert_relative_eq!(v, expected, max_relative = 1e-9);
    }

    #[test]
    fn detector_spectrum_has_unit_integral() {
        let det = DetectorModel::gaussian(50e6, 400e6);
        let k = SpectralFunction::detector(&det, 1e6, 600).unwrap();
        assert_relative_eq!(k.integral().re, 1.0, max_relative = 1e-12);
        assert_relative_eq!(k.rms_width(), 50e6, max_relative = 1e-6);
        assert!(k.is_hermitian(1e-12));
    }

    #[test]
    fn pulse_cross_spectrum_integrates_to_overlap() {
        let grid = TimeGrid::from_window(0.0, 10e-6, 100e6);
        let a = PulseProfile::gaussian(5e-6, 0.3e-6);
        let b = PulseProfile::gaussian(5e-6, 0.6e-6);
        let s = SpectralFunction::pulse_cross(&a, &b, &grid, 10e3, 400).unwrap();
        assert_relative_eq!(
            s.integral().re,
            gaussian_overlap(0.3e-6, 0.6e-6),
            max_relative = 1e-6
        );
        assert!(s.is_hermitian(1e-9));
    }

    #[test]
    fn mismatched_grids_need_resampling() {
        let a = SpectralFunction::gaussian(1e6, 1e4, 100, Provenance::DetectorResponse).unwrap();
        let b = SpectralFunction::gaussian(1e6, 2e4, 100, Provenance::PulseCrossSpectrum).unwrap();
        assert!(matches!(
            visibility_theory(&a, &b, 0.0, 1.0),
            Err(TheoryError::ResampleRequired(_))
        ));
        let c = SpectralFunction::new(
            0.5e4,
            1e4,
            vec![Complex64::new(1.0, 0.0); 3],
            Provenance::PulseCrossSpectrum,
        )
        .unwrap();
        assert!(visibility_theory(&a, &c, 0.0, 1.0).is_err());
    }
}
