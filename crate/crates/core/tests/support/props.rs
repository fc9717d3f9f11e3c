//! Randomized invariants shared by the property tests and the acceptance run.

use std::f64::consts::TAU;

use atomlight::analysis::{demodulate, fit_fringe_with, FitOptions};
use atomlight::io::{trace_from_bytes, trace_from_csv, trace_to_bytes, trace_to_csv};
use atomlight::sequencer::{run_batch, MemoryConfig, SequenceConfig};
use atomlight::signal::{
    DetectorModel, LoConfig, PulseProfile, PulseShape, TimeGrid, Trace, TraceLabel, TraceMeta,
};
use atomlight::theory::{ideal_visibility, visibility_theory, Provenance, SpectralFunction};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub type Property = fn(u32, u64) -> Result<(), String>;

fn runner(cases: u32, seed: u64) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &bytes),
    )
}

fn shape() -> impl Strategy<Value = PulseShape> {
    prop_oneof![
        (3e-6..7e-6, 20e-9..800e-9).prop_map(|(c, w)| PulseShape::gaussian(c, w)),
        (2e-6..5e-6, 20e-9..300e-9, 50e-9..800e-9)
            .prop_map(|(c, r, f)| PulseShape::exp_mod_gaussian(c, r, f)),
    ]
}

/// Discrete `Σa²Δt = 1` after normalization, and `a ≥ 0`.
pub fn normalization(cases: u32, seed: u64) -> Result<(), String> {
    runner(cases, seed)
        .run(&(shape(), 50e6..400e6), |(shape, fs)| {
            let grid = TimeGrid::from_window(0.0, 12e-6, fs);
            let p = PulseProfile::new(shape)
                .normalized(&grid)
                .expect("fits the grid");
            prop_assert!((p.energy(&grid) - 1.0).abs() <= 1e-9);
            prop_assert!(p.sample(&grid).iter().all(|&v| v >= 0.0));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn small_batch(input: f64, seed: u64, noise: f64) -> atomlight::sequencer::ShotBatch {
    let seq = SequenceConfig {
        repetitions: 3,
        input_intensity: input,
        ..Default::default()
    };
    let det = DetectorModel::gaussian(20e6, 100e6).with_noise(noise);
    run_batch(
        &seq,
        &MemoryConfig::default(),
        &LoConfig::new(1.0, 2e6),
        &det,
        3e-6,
        seed,
    )
    .expect("valid batch")
}

/// Scaling the input intensity by α scales every noiseless current by √α.
pub fn linearity(cases: u32, seed: u64) -> Result<(), String> {
    runner(cases, seed)
        .run(&(0.01f64..100.0, any::<u64>()), |(alpha, s)| {
            let a = small_batch(1.0, s, 0.0);
            let b = small_batch(alpha, s, 0.0);
            for (x, y) in a.shots.iter().zip(&b.shots) {
                for (p, q) in [(&x.t, &y.t), (&x.r, &y.r)] {
                    let scale = p.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    for (u, v) in p.samples().iter().zip(q.samples()) {
                        prop_assert!((alpha.sqrt() * u - v).abs() <= 1e-9 * alpha.sqrt() * scale);
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Scaling the measured power moves neither the fringe maximum nor the
/// demodulated phase.
pub fn argmax_invariance(cases: u32, seed: u64) -> Result<(), String> {
    let k = TAU / 10e-6;
    runner(cases, seed)
        .run(
            &(0.1f64..0.95, 0.0f64..TAU, 1e-3f64..1e3, 0.0f64..TAU),
            |(v, theta, gain, phi)| {
                let pts: Vec<(f64, f64)> = (0..40)
                    .map(|i| {
                        let b = i as f64 * 0.5e-6;
                        (b, 1.0 + v * (k * b - theta).cos())
                    })
                    .collect();
                let scaled: Vec<(f64, f64)> = pts.iter().map(|&(b, p)| (b, gain * p)).collect();
                let f1 = fit_fringe_with(&pts, k, &FitOptions::default()).expect("fit");
                let f2 = fit_fringe_with(&scaled, k, &FitOptions::default()).expect("fit");
                let d = (f1.phase - f2.phase + TAU / 2.0).rem_euclid(TAU) - TAU / 2.0;
                prop_assert!(d.abs() <= 1e-6, "phase moved by {d}");
                prop_assert!((f1.visibility - f2.visibility).abs() <= 1e-6);

                let dw = TAU * 3e6;
                let tone = |amp: f64| {
                    let samples = (0..1000)
                        .map(|i| amp * (dw * i as f64 * 1e-8 - phi).cos())
                        .collect();
                    Trace::new(
                        0.0,
                        1e8,
                        samples,
                        TraceMeta {
                            shot: 0,
                            label: TraceLabel::T,
                        },
                    )
                };
                let d1 = demodulate(&tone(1.0), dw, 0.0, 10e-6).expect("demod");
                let d2 = demodulate(&tone(gain), dw, 0.0, 10e-6).expect("demod");
                let dd = (d1.phase - d2.phase + TAU / 2.0).rem_euclid(TAU) - TAU / 2.0;
                prop_assert!(dd.abs() <= 1e-9);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

/// `0 ≤ 𝒱₀ ≤ 1` and `0 ≤ 𝒱(δω) ≤ 𝒱₀` for gaussian spectra.
pub fn visibility_bounds(cases: u32, seed: u64) -> Result<(), String> {
    runner(cases, seed)
        .run(
            &(
                0.0f64..10.0,
                0.0f64..10.0,
                0.1e6f64..50e6,
                0.1e6f64..5e6,
                -20e6f64..20e6,
            ),
            |(it, ir, s_k, s_a, f)| {
                let v0 = ideal_visibility(it, ir);
                prop_assert!((0.0..=1.0).contains(&v0));
                let df = s_k.min(s_a) / 10.0;
                let half = (8.0 * s_k.max(s_a).max(f.abs()) / df).ceil() as usize;
                let k = SpectralFunction::gaussian(s_k, df, half, Provenance::DetectorResponse)
                    .expect("spectrum");
                let a = SpectralFunction::gaussian(s_a, df, half, Provenance::PulseCrossSpectrum)
                    .expect("spectrum");
                let v = visibility_theory(&k, &a, TAU * f, v0).expect("theory");
                prop_assert!(v >= 0.0 && v <= v0 * (1.0 + 1e-9), "V = {v}, V0 = {v0}");
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

/// Same seed, same batch; another seed, another noise realization.
pub fn batch_reproducibility(cases: u32, seed: u64) -> Result<(), String> {
    runner(cases, seed)
        .run(&any::<u64>(), |s| {
            let a = small_batch(1.0, s, 0.01);
            prop_assert!(a == small_batch(1.0, s, 0.01));
            prop_assert!(a.shots[0].t != small_batch(1.0, s.wrapping_add(1), 0.01).shots[0].t);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// CSV and binary traces read back bit for bit.
pub fn trace_round_trip(cases: u32, seed: u64) -> Result<(), String> {
    let finite = any::<f64>().prop_filter("finite", |v| v.is_finite());
    runner(cases, seed)
        .run(
            &(
                prop::collection::vec(finite, 1..300),
                1.0f64..1e10,
                -1.0f64..1.0,
                0usize..10_000,
            ),
            |(samples, fs, t0, shot)| {
                let t = Trace::new(
                    t0,
                    fs,
                    samples,
                    TraceMeta {
                        shot,
                        label: TraceLabel::R1,
                    },
                );
                let csv = trace_from_csv(trace_to_csv(&t).expect("csv").as_bytes()).expect("read");
                let bin = trace_from_bytes(&trace_to_bytes(&t).expect("bin")).expect("read");
                for back in [&csv, &bin] {
                    prop_assert_eq!(back.meta(), t.meta());
                    prop_assert_eq!(back.t0().to_bits(), t.t0().to_bits());
                    prop_assert_eq!(back.sample_rate().to_bits(), t.sample_rate().to_bits());
                    let same = back
                        .samples()
                        .iter()
                        .zip(t.samples())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                    prop_assert!(same && back.len() == t.len());
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

pub const ALL: &[(&str, Property)] = &[
    ("normalization", normalization),
    ("linearity", linearity),
    ("argmax invariance", argmax_invariance),
    ("visibility bounds", visibility_bounds),
    ("batch reproducibility", batch_reproducibility),
    ("trace round-trip", trace_round_trip),
];

#[allow(dead_code)]
pub fn run_all(cases: u32, seed: u64) -> Vec<(&'static str, Result<(), String>)> {
    ALL.iter()
        .map(|(name, p)| (*name, p(cases, seed)))
        .collect()
}
