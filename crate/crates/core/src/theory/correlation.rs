use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::TheoryError;
use crate::signal::{PulseProfile, TimeGrid};

/// Sampled correlation `𝒜(τ_m)` at lags `τ_m = m·dt`, `m = −(n−1)..=(n−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    dt: f64,
    values: Vec<f64>,
}

impl CorrelationFunction {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn center(&self) -> usize {
        self.values.len() / 2
    }

    pub fn lag(&self, j: usize) -> f64 {
        (j as f64 - self.center() as f64) * self.dt
    }

    pub fn at_zero(&self) -> f64 {
        self.values[self.center()]
    }

    /// Linear interpolation between lags; zero outside the sampled range.
    pub fn at(&self, tau: f64) -> f64 {
        let pos = tau / self.dt + self.center() as f64;
        if pos < 0.0 || pos > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values[i];
        }
        let f = pos - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// Pulse amplitude cross-correlation `𝒜_TR(τ) = ∫a_T(t)·a_R(t − τ) dt` on
/// the grid. Both profiles are normalized on `grid` first, so `𝒜_TT(0) = 1`.
pub fn cross_correlation(
    a_t: &PulseProfile,
    a_r: &PulseProfile,
    grid: &TimeGrid,
) -> Result<CorrelationFunction, TheoryError> {
    let x = a_t.normalized(grid)?.sample(grid);
    let y = a_r.normalized(grid)?.sample(grid);
    let n = grid.len;
    let n_fft = (2 * n).next_power_of_two();
    let mut fx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut fy: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fx.resize(n_fft, Complex64::default());
    fy.resize(n_fft, Complex64::default());
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_fft);
    fwd.process(&mut fx);
    fwd.process(&mut fy);
    for (a, b) in fx.iter_mut().zip(&fy) {
        *a *= b.conj();
    }
    planner.plan_fft_inverse(n_fft).process(&mut fx);
    let scale = grid.dt() / n_fft as f64;
    // c[m] = Σ x[i]·y[i − m]; negative m wrap to the end of the buffer
    let values = (-(n as isize - 1)..n as isize)
        .map(|m| fx[m.rem_euclid(n_fft as isize) as usize].re * scale)
        .collect();
    Ok(CorrelationFunction {
        dt: grid.dt(),
        values,
    })
}

/// Direct evaluation of `Σ a_T(t_i)·a_R(t_i − τ)·Δt` for an arbitrary lag,
/// using the continuous envelopes of the normalized profiles.
pub fn overlap(
    a_t: &PulseProfile,
    a_r: &PulseProfile,
    grid: &TimeGrid,
    tau: f64,
) -> Result<f64, TheoryError> {
    let x = a_t.normalized(grid)?;
    let y = a_r.normalized(grid)?;
    Ok(grid
        .times()
        .map(|t| x.amplitude(t) * y.amplitude(t - tau))
        .sum::<f64>()
        * grid.dt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::gaussian_overlap;
    use approx::assert_relative_eq;

    fn grid() -> TimeGrid {
        TimeGrid::from_window(0.0, 20e-6, 100e6)
    }

    #[test]
    fn autocorrelation_peaks_at_one() {
        let p = PulseProfile::gaussian(10e-6, 0.5e-6);
        let c = cross_correlation(&p, &p, &grid()).unwrap();
        assert_relative_eq!(c.at_zero(), 1.0, max_relative = 1e-12);
        let max = c.values().iter().cloned().fold(f64::MIN, f64::max);
        assert_relative_eq!(max, c.at_zero(), max_relative = 1e-15);
    }

    #[test]
    fn unequal_widths_follow_gaussian_overlap() {
        let s = 0.4e-6;
        let a = PulseProfile::gaussian(10e-6, s);
        let b = PulseProfile::gaussian(10e-6, 2.0 * s);
        let c = cross_correlation(&a, &b, &grid()).unwrap();
        assert_relative_eq!(c.at_zero(), (4.0f64 / 5.0).sqrt(), max_relative = 1e-9);
        assert_relative_eq!(
            c.at_zero(),
            gaussian_overlap(s, 2.0 * s),
            max_relative = 1e-9
        );
    }

    #[test]
    fn disjoint_pulses_do_not_overlap() {
        let a = PulseProfile::gaussian(4e-6, 0.2e-6);
        let b = PulseProfile::gaussian(16e-6, 0.2e-6);
        let c = cross_correlation(&a, &b, &grid()).unwrap();
        assert!(c.at_zero().abs() < 1e-12);
        // the peak sits at the separation τ = t_T − t_R
        assert_relative_eq!(c.at(-12e-6), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let a = PulseProfile::gaussian(9e-6, 0.3e-6);
        let b = PulseProfile::gaussian(11e-6, 0.6e-6);
        let g = grid();
        let c = cross_correlation(&a, &b, &g).unwrap();
        for tau in [-3e-6, -2e-6, 0.0, 1.5e-6] {
            let d = overlap(&a, &b, &g, tau).unwrap();
            assert!(
                (c.at(tau) - d).abs() < 1e-12,
                "tau {tau}: {} vs {d}",
                c.at(tau)
            );
        }
    }
}
