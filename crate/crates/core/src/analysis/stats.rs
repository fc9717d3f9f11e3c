//! Small statistics helpers shared by the analysis routines.

use std::f64::consts::{PI, TAU};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (`n − 1` denominator).
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_error: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let slope_error = if n > 2.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept,
        slope_error,
    }
}

/// Kolmogorov distribution tail `Q(λ) = 2·Σ(−1)^{k−1}·exp(−2k²λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test of `samples` against the uniform
/// distribution on `[lo, hi)`. Returns `(D, p)`; the p-value uses the
/// asymptotic distribution with Stephens' small-sample correction.
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut u: Vec<f64> = samples.iter().map(|v| (v - lo) / (hi - lo)).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let above = (i as f64 + 1.0) / n - v;
            let below = v - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    (d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d))
}

/// Remove 2π jumps between consecutive phases.
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let d = p - phases[i - 1];
            if d > PI {
                offset -= TAU;
            } else if d < -PI {
                offset += TAU;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Wrap into `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert_relative_eq!(std_dev(&x), (5.0f64 / 3.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn regression_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = linear_regression(&x, &y);
        assert_relative_eq!(f.slope, 3.0, max_relative = 1e-12);
        assert_relative_eq!(f.intercept, -1.0, max_relative = 1e-12);
        assert!(f.slope_error < 1e-12);
    }

    #[test]
    fn ks_distinguishes_uniform_from_clustered() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * TAU).collect();
        let (_, p) = ks_uniform(&u, 0.0, TAU);
        assert!(p > 0.01);
        let c: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let (d, p) = ks_uniform(&c, 0.0, TAU);
        assert!(d > 0.8 && p < 1e-10);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // tabulated: Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098
        assert_relative_eq!(kolmogorov_q(1.36), 0.0494, epsilon = 5e-4);
        assert_relative_eq!(kolmogorov_q(1.63), 0.00983, epsilon = 2e-4);
    }

    #[test]
    fn unwrap_restores_ramp() {
        let ramp: Vec<f64> = (0..50).map(|i| 0.4 * i as f64).collect();
        let wrapped: Vec<f64> = ramp.iter().map(|v| v.rem_euclid(TAU)).collect();
        for (a, b) in unwrap(&wrapped).iter().zip(&ramp) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(wrap_pi(3.0 * PI), PI, epsilon = 1e-12);
    }
}
