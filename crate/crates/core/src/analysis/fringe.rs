use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FringeErrors {
    pub offset: f64,
    pub visibility: f64,
    pub phase: f64,
    pub period: f64,
}

/// Least-squares fit of `P(B) = C·[1 + 𝒱·cos(k·B − θ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// `C`.
    pub offset: f64,
    pub visibility: f64,
    /// `θ` in `[0, 2π)`.
    pub phase: f64,
    /// `k` in rad/T.
    pub wavenumber: f64,
    /// `2π/k` in tesla.
    pub period: f64,
    pub errors: FringeErrors,
    pub residual_rms: f64,
    pub phase_indeterminate: bool,
    pub iterations: usize,
    pub restarts: usize,
}

impl FringeFit {
    pub fn model(&self, b: f64) -> f64 {
        self.offset * (1.0 + self.visibility * (self.wavenumber * b - self.phase).cos())
    }

    /// Fringe amplitude `C·𝒱`.
    pub fn amplitude(&self) -> f64 {
        self.offset * self.visibility
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub restarts: usize,
    /// Fit `k` as a free parameter; otherwise it stays at the initial value.
    pub free_wavenumber: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            restarts: 4,
            free_wavenumber: true,
        }
    }
}

/// Fit with `k` initialized at `γ·Δτ`.
pub fn fit_fringe(
    points: &[(f64, f64)],
    gamma: f64,
    storage_time: f64,
) -> Result<FringeFit, AnalysisError> {
    fit_fringe_with(points, gamma * storage_time, &FitOptions::default())
}

// Fit in scaled coordinates x = (B − B_mid)/period₀, y/ȳ, where the model is
// c·[1 + v·cos(q·x − φ)] with q ≈ 2π.
struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
    free_q: bool,
}

impl Problem {
    fn residuals(&self, p: &Vector4<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(&self.y)
                .map(|(&x, &y)| y - p[0] * (1.0 + p[1] * (p[2] * x - p[3]).cos())),
        )
    }

    fn jacobian(&self, p: &Vector4<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.x.len(), 4);
        for (i, &x) in self.x.iter().enumerate() {
            let (s, c) = (p[2] * x - p[3]).sin_cos();
            j[(i, 0)] = 1.0 + p[1] * c;
            j[(i, 1)] = p[0] * c;
            j[(i, 2)] = if self.free_q {
                -p[0] * p[1] * s * x
            } else {
                0.0
            };
            j[(i, 3)] = p[0] * p[1] * s;
        }
        j
    }

    fn sse(&self, p: &Vector4<f64>) -> f64 {
        self.residuals(p).norm_squared()
    }
}

fn project(p: &mut Vector4<f64>) {
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[3] += PI;
    }
    if p[1] > 1.0 {
        p[1] = 1.0;
    }
    p[3] = p[3].rem_euclid(TAU);
}

struct Solution {
    p: Vector4<f64>,
    sse: f64,
    iterations: usize,
    converged: bool,
}

fn levenberg_marquardt(prob: &Problem, start: Vector4<f64>, max_iter: usize) -> Solution {
    let mut p = start;
    project(&mut p);
    let mut sse = prob.sse(&p);
    let mut lambda = 1e-3;
    let scale = prob
        .y
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    for it in 1..=max_iter {
        let j = prob.jacobian(&p);
        let r = prob.residuals(&p);
        let jtj: Matrix4<f64> = (j.transpose() * &j).fixed_view::<4, 4>(0, 0).into();
        let jtr: Vector4<f64> = (j.transpose() * &r).fixed_rows::<4>(0).into();
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            project(&mut trial);
            let trial_sse = prob.sse(&trial);
            if trial_sse <= sse {
                let gain = sse - trial_sse;
                p = trial;
                sse = trial_sse;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if gain <= 1e-15 * scale || step.norm() < 1e-13 {
                    return Solution {
                        p,
                        sse,
                        iterations: it,
                        converged: true,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: stationary point
            return Solution {
                p,
                sse,
                iterations: it,
                converged: true,
            };
        }
    }
    Solution {
        p,
        sse,
        iterations: max_iter,
        converged: false,
    }
}

/// Fit `P(B) = C·[1 + 𝒱·cos(k·B − θ)]` starting from `k = k0`. The phase is
/// seeded from a grid of 16 values of `θ` and three of `𝒱`, and the best
/// seeds are refined by Levenberg–Marquardt with `𝒱` kept in `[0, 1]`.
pub fn fit_fringe_with(
    points: &[(f64, f64)],
    k0: f64,
    opts: &FitOptions,
) -> Result<FringeFit, AnalysisError> {
    let n = points.len();
    if !(k0 > 0.0) || !k0.is_finite() {
        return Err(AnalysisError::InvalidParameter(
            "initial fringe wavenumber must be positive".into(),
        ));
    }
    if points.iter().any(|(b, p)| !b.is_finite() || !p.is_finite()) {
        return Err(AnalysisError::InvalidParameter(
            "fringe points must be finite".into(),
        ));
    }
    if n < 6 {
        return Err(AnalysisError::InsufficientData(format!("{n} points")));
    }
    let period0 = TAU / k0;
    let (bmin, bmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (b, _)| {
            (lo.min(*b), hi.max(*b))
        });
    if bmax - bmin < period0 * (1.0 - 1e-9) {
        return Err(AnalysisError::InsufficientData(format!(
            "span {:e} T is shorter than the period {:e} T",
            bmax - bmin,
            period0
        )));
    }
    let b_mid = 0.5 * (bmin + bmax);
    let y_mean = points.iter().map(|(_, p)| p).sum::<f64>() / n as f64;
    let y_scale = if y_mean.abs() > 0.0 {
        y_mean.abs()
    } else {
        1.0
    };
    let prob = Problem {
        x: points.iter().map(|(b, _)| (b - b_mid) / period0).collect(),
        y: points.iter().map(|(_, p)| p / y_scale).collect(),
        free_q: opts.free_wavenumber,
    };

    let c0 = y_mean / y_scale;
    let spread = prob.y.iter().map(|v| (v - c0).powi(2)).sum::<f64>() / n as f64;
    let to_fit = |p: &Vector4<f64>, errors: FringeErrors, sse: f64, iterations, restarts| {
        let k = p[2] / period0;
        FringeFit {
            offset: p[0] * y_scale,
            visibility: p[1],
            phase: (p[3] + k * b_mid).rem_euclid(TAU),
            wavenumber: k,
            period: TAU / k,
            errors,
            residual_rms: (sse / n as f64).sqrt() * y_scale,
            phase_indeterminate: false,
            iterations,
            restarts,
        }
    };
    if spread <= 1e-24 * c0 * c0 || spread == 0.0 {
        let p = Vector4::new(c0, 0.0, TAU, 0.0);
        let mut fit = to_fit(&p, FringeErrors::default(), prob.sse(&p), 0, 0);
        fit.phase_indeterminate = true;
        return Ok(fit);
    }

    let mut seeds: Vec<(f64, Vector4<f64>)> = Vec::with_capacity(48);
    for i in 0..16 {
        let theta = TAU * i as f64 / 16.0;
        for v in [0.1, 0.5, 0.9] {
            let p = Vector4::new(c0, v, TAU, theta);
            seeds.push((prob.sse(&p), p));
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<(Solution, usize)> = None;
    for (attempt, (_, seed)) in seeds.iter().take(opts.restarts + 1).enumerate() {
        let sol = levenberg_marquardt(&prob, *seed, opts.max_iterations);
        let better = best.as_ref().is_none_or(|(b, _)| sol.sse < b.sse);
        let done = sol.converged && (sol.p[2] - TAU).abs() < 0.5 * TAU;
        if better {
            best = Some((sol, attempt));
        }
        if done {
            break;
        }
    }
    let (sol, restarts) = best.expect("at least one attempt");
    if !sol.converged || !sol.p.iter().all(|v| v.is_finite()) {
        return Err(AnalysisError::FitFailed {
            restarts,
            reason: format!("no convergence within {} iterations", opts.max_iterations),
            residual_rms: (sol.sse / n as f64).sqrt() * y_scale,
        });
    }
    if (sol.p[2] - TAU).abs() >= 0.5 * TAU {
        return Err(AnalysisError::FitFailed {
            restarts,
            reason: format!(
                "fringe wavenumber wandered to {:.3} of the initial value",
                sol.p[2] / TAU
            ),
            residual_rms: (sol.sse / n as f64).sqrt() * y_scale,
        });
    }

    // covariance s²(JᵀJ)⁻¹ in scaled coordinates, mapped to (C, 𝒱, θ, period)
    let p = sol.p;
    let j = prob.jacobian(&p);
    let free = if opts.free_wavenumber { 4 } else { 3 };
    let dof = (n as f64 - free as f64).max(1.0);
    let s2 = sol.sse / dof;
    let jtj: Matrix4<f64> = (j.transpose() * &j).fixed_view::<4, 4>(0, 0).into();
    let mut m = jtj;
    if !opts.free_wavenumber {
        m[(2, 2)] = 1.0;
    }
    let cov = m.try_inverse().map(|c| c * s2);
    let errors = match cov {
        Some(mut c) => {
            if !opts.free_wavenumber {
                for i in 0..4 {
                    c[(2, i)] = 0.0;
                    c[(i, 2)] = 0.0;
                }
            }
            // θ = φ + q·b_mid/period₀, period = period₀·2π/q
            let u = b_mid / period0;
            let var_theta = c[(3, 3)] + u * u * c[(2, 2)] + 2.0 * u * c[(2, 3)];
            let dperiod = period0 * TAU / (p[2] * p[2]);
            FringeErrors {
                offset: c[(0, 0)].max(0.0).sqrt() * y_scale,
                visibility: c[(1, 1)].max(0.0).sqrt(),
                phase: var_theta.max(0.0).sqrt(),
                period: dperiod * c[(2, 2)].max(0.0).sqrt(),
            }
        }
        None => FringeErrors {
            offset: f64::INFINITY,
            visibility: f64::INFINITY,
            phase: f64::INFINITY,
            period: f64::INFINITY,
        },
    };
    let mut fit = to_fit(&p, errors, sol.sse, sol.iterations, restarts);
    // the phase is meaningless when the fringe is not resolved from zero
    fit.phase_indeterminate = fit.visibility == 0.0 || fit.visibility < 2.0 * fit.errors.visibility;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synth(c: f64, v: f64, k: f64, theta: f64, b: &[f64]) -> Vec<(f64, f64)> {
        b.iter()
            .map(|&x| (x, c * (1.0 + v * (k * x - theta).cos())))
            .collect()
    }

    fn sweep(period: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 2.0 * period * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let k = TAU / 10.638e-6;
        let pts = synth(1.0, 0.8, k, 0.3, &sweep(10.638e-6, 41));
        let fit = fit_fringe_with(&pts, k * 1.01, &FitOptions::default()).unwrap();
        assert_relative_eq!(fit.offset, 1.0, epsilon = 1e-6);
        assert_relative_eq!(fit.visibility, 0.8, epsilon = 1e-6);
        assert_relative_eq!(fit.phase, 0.3, epsilon = 1e-6);
        assert_relative_eq!(fit.period, 10.638e-6, max_relative = 1e-6);
        assert!(!fit.phase_indeterminate);
    }

    #[test]
    fn flat_data_is_indeterminate() {
        let pts: Vec<(f64, f64)> = sweep(1.0, 20).into_iter().map(|b| (b, 3.0)).collect();
        let fit = fit_fringe_with(&pts, TAU, &FitOptions::default()).unwrap();
        assert_eq!(fit.visibility, 0.0);
        assert!(fit.phase_indeterminate);
        assert_relative_eq!(fit.offset, 3.0, max_relative = 1e-15);
    }

    #[test]
    fn full_visibility_stays_in_domain() {
        let k = TAU;
        let pts = synth(2.0, 1.0, k, 4.0, &sweep(1.0, 30));
        let fit = fit_fringe_with(&pts, k, &FitOptions::default()).unwrap();
        assert!(fit.visibility <= 1.0);
        assert_relative_eq!(fit.visibility, 1.0, epsilon = 1e-6);
        assert_relative_eq!(fit.phase, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_short_or_sparse_sweeps() {
        let pts = synth(1.0, 0.5, TAU, 0.0, &sweep(1.0, 5));
        assert!(matches!(
            fit_fringe_with(&pts, TAU, &FitOptions::default()),
            Err(AnalysisError::InsufficientData(_))
        ));
        let narrow: Vec<f64> = (0..20).map(|i| 0.04 * i as f64).collect();
        let pts = synth(1.0, 0.5, TAU, 0.0, &narrow);
        assert!(fit_fringe_with(&pts, TAU, &FitOptions::default()).is_err());
    }

    #[test]
    fn errors_shrink_with_more_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut noisy = |n: usize| {
            let pts: Vec<(f64, f64)> = synth(1.0, 0.6, TAU, 1.0, &sweep(1.0, n))
                .into_iter()
                .map(|(b, p)| (b, p + 0.01 * (rng.random::<f64>() - 0.5)))
                .collect();
            fit_fringe_with(&pts, TAU, &FitOptions::default()).unwrap()
        };
        let a = noisy(20);
        let b = noisy(400);
        assert!(b.errors.visibility < a.errors.visibility);
        assert!((b.visibility - 0.6).abs() < 4.0 * b.errors.visibility + 1e-4);
    }
}
