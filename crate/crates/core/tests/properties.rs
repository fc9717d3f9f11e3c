use std::f64::consts::TAU;

use atomlight::analysis::demodulate;
use atomlight::analysis::stats::wrap_pi;
use atomlight::sequencer::{
    drift_phases, run_batch, spin_phase, DecayLaw, DriftModel, MemoryConfig, SequenceConfig,
};
use atomlight::signal::{DetectorModel, LoConfig};
use proptest::prelude::*;

#[path = "support/props.rs"]
mod props;

const CASES: u32 = 128;

#[test]
fn profile_normalization() {
    props::normalization(CASES, 1).unwrap();
}

#[test]
fn synthesis_is_linear_in_field_amplitude() {
    props::linearity(32, 2).unwrap();
}

#[test]
fn phase_estimates_ignore_gain() {
    props::argmax_invariance(CASES, 3).unwrap();
}

#[test]
fn visibility_stays_in_bounds() {
    props::visibility_bounds(CASES, 4).unwrap();
}

#[test]
fn batches_reproduce_from_seed() {
    props::batch_reproducibility(32, 5).unwrap();
}

#[test]
fn traces_round_trip() {
    props::trace_round_trip(CASES, 6).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn decay_is_monotone(lifetime in 1e-6f64..1e-3, a in 0.0f64..1e-4, b in 0.0f64..1e-4, gaussian in any::<bool>()) {
        let mem = MemoryConfig {
            lifetime,
            decay: if gaussian { DecayLaw::Gaussian } else { DecayLaw::Exponential },
            ..Default::default()
        };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(mem.decay_factor(lo) >= mem.decay_factor(hi));
        prop_assert!(mem.decay_factor(hi) > 0.0 && mem.decay_factor(lo) <= 1.0);
    }

    #[test]
    fn spin_phase_is_bilinear(b in -1e-4f64..1e-4, tau in 0.0f64..2e-5, k in 0.0f64..4.0) {
        let mem = MemoryConfig::default();
        let p = spin_phase(b, tau, &mem);
        prop_assert!((spin_phase(k * b, tau, &mem) - k * p).abs() <= 1e-9 * (1.0 + p.abs() * k));
        prop_assert!((spin_phase(b, k * tau, &mem) - k * p).abs() <= 1e-9 * (1.0 + p.abs() * k));
    }

    #[test]
    fn drift_phases_stay_in_range(n in 1usize..200, seed in any::<u64>(), step in 0.0f64..3.0) {
        let lo = LoConfig::new(1.0, 5e3);
        for model in [DriftModel::Uniform, DriftModel::RandomWalk { step }, DriftModel::LoBeat] {
            let p = drift_phases(&model, n, &lo, 10e-6, seed);
            prop_assert_eq!(p.len(), n);
            prop_assert!(p.iter().all(|x| (0.0..TAU).contains(x)));
        }
    }

    #[test]
    fn lo_phase_shifts_demodulated_phase(shift in 0.0f64..TAU, seed in any::<u64>()) {
        // the T record carries φ_T = drift + lo phase, so shifting the LO
        // phase moves the demodulated phase by the same amount
        let seq = SequenceConfig { repetitions: 1, drift: DriftModel::None, ..Default::default() };
        let det = DetectorModel::ideal(100e6);
        let mem = MemoryConfig::default();
        let mut lo = LoConfig::new(1.0, 4e6);
        let a = run_batch(&seq, &mem, &lo, &det, 0.0, seed).unwrap();
        lo.phase = shift;
        let b = run_batch(&seq, &mem, &lo, &det, 0.0, seed).unwrap();
        let da = demodulate(&a.shots[0].t, lo.detuning, -1e-6, 3e-6).unwrap();
        let db = demodulate(&b.shots[0].t, lo.detuning, -1e-6, 3e-6).unwrap();
        prop_assert!(wrap_pi(db.phase - da.phase - shift).abs() < 1e-6);
    }
}
