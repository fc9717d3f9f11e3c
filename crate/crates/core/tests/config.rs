use approx::assert_relative_eq;
use atomlight::io::{load_config, parse_config, ConfigError, RunConfig, ViolationKind};
use std::path::Path;

fn sample() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    load_config(&path).unwrap()
}

#[test]
fn sample_config_loads() {
    let cfg = sample();
    assert_relative_eq!(cfg.sequence.write_width, 2e-6);
    assert_relative_eq!(cfg.sequence.read_width, 3e-6);
    assert_relative_eq!(cfg.memory.storage_time, 5e-6);
    assert_relative_eq!(cfg.sequence.window, 10e-6);
    assert_eq!(cfg.sequence.repetitions, 100);
    assert_relative_eq!(cfg.lo.detuning_hz(), 5e3, max_relative = 1e-12);
    assert_relative_eq!(cfg.detector.sample_rate, 100e6);
    assert_relative_eq!(
        cfg.sequence.split,
        RunConfig::default().sequence.split,
        max_relative = 1e-12
    );
}

#[test]
fn sample_config_matches_defaults() {
    let mut cfg = sample();
    cfg.out_dir = None;
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn bare_numbers_are_rejected_for_quantities() {
    match parse_config("[memory]\nstorage_time = 5e-6\n", "x") {
        Err(ConfigError::Invalid(v)) => {
            assert_eq!(v.len(), 1);
            assert_eq!(v[0].key, "memory.storage_time");
            assert_eq!(v[0].kind, ViolationKind::Unit);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn negative_storage_time_is_rejected() {
    match parse_config("[memory]\nstorage_time = \"-1us\"\n", "x") {
        Err(ConfigError::Invalid(v)) => {
            assert!(v
                .iter()
                .any(|x| x.key == "memory.storage_time" && x.kind == ViolationKind::Range))
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn storage_time_beyond_window_names_both_keys() {
    match parse_config(
        "[memory]\nstorage_time = \"9us\"\n[sequence]\nwindow = \"10us\"\n",
        "x",
    ) {
        Err(ConfigError::Invalid(v)) => {
            let keys: Vec<&str> = v.iter().map(|x| x.key.as_str()).collect();
            assert!(
                keys.iter()
                    .any(|k| k.contains("memory.storage_time") && k.contains("sequence.window")),
                "{keys:?}"
            );
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        load_config(Path::new("/nonexistent/run.toml")),
        Err(ConfigError::Io { .. })
    ));
}
