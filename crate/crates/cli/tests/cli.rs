use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 5

[sequence]
repetitions = 12

[sweep]
periods = 2
points = 25
detunings = ["5kHz", "4MHz"]
storage_times = ["3us", "5us"]
"#;

fn atomlight(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atomlight"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .env_remove("ALHI_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error record");
    serde_json::from_str(line).unwrap()
}

/// Rows of a table written by the CLI, without comments or header.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn persisted_batch_analyzes_like_the_in_memory_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    for format in ["csv", "bin"] {
        let out = atomlight(
            dir.path(),
            &["-c", &cfg, "-o", "sim", "simulate", "--format", format],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = atomlight(
            dir.path(),
            &["-c", &cfg, "-o", "disk", "analyze", "--input", "sim/batch"],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = atomlight(dir.path(), &["-c", &cfg, "-o", "mem", "analyze"]);
        assert!(out.status.success());
        let disk = json(&dir.path().join("disk/analysis.json"));
        let mem = json(&dir.path().join("mem/analysis.json"));
        assert_eq!(disk["mean_power"], mem["mean_power"]);
        assert_eq!(
            fs::read(dir.path().join("disk/shots.csv")).unwrap(),
            fs::read(dir.path().join("mem/shots.csv")).unwrap()
        );
    }
}

#[test]
fn every_run_writes_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out = atomlight(
        dir.path(),
        &["-c", &cfg, "-o", "o", "--seed", "77", "analyze"],
    );
    assert!(out.status.success());
    let run = json(&dir.path().join("o/run.json"));
    assert_eq!(run["command"], "analyze");
    assert_eq!(run["seed"], 77);
    assert!(run["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a == "shots.csv"));
}

#[test]
fn flat_data_fits_with_indeterminate_phase() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("b_field_t,mean_power\n");
    for i in 0..30 {
        text.push_str(&format!("{:e},0.25\n", i as f64 * 1e-6));
    }
    let input = write(dir.path(), "flat.csv", &text);
    let out = atomlight(dir.path(), &["-o", "o", "fit", &input]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fit = json(&dir.path().join("o/fit.json"));
    assert_eq!(fit["fit"]["phase_indeterminate"], true);
    assert!(fit["fit"]["visibility"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn storage_time_beyond_window_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[memory]\nstorage_time = \"12us\"\n[sequence]\nwindow = \"10us\"\n",
    );
    let out = atomlight(dir.path(), &["-c", &cfg, "-o", "o", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "config");
    let keys: Vec<&str> = rec["error"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["key"].as_str().unwrap())
        .collect();
    assert!(
        keys.iter()
            .any(|k| k.contains("memory.storage_time") && k.contains("sequence.window")),
        "{keys:?}"
    );
}

#[test]
fn negative_storage_time_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "neg.toml",
        "[memory]\nstorage_time = \"-2us\"\n",
    );
    let out = atomlight(dir.path(), &["-c", &cfg, "-o", "o", "analyze"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["error"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["key"] == "memory.storage_time"));
}

#[test]
fn bad_arguments_and_missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = atomlight(dir.path(), &["sweep", "--param", "colour"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "usage");
    let out = atomlight(dir.path(), &["-o", "o", "analyze", "--input", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "io");
}

#[test]
fn field_sweep_writes_fringe_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out = atomlight(
        dir.path(),
        &["-c", &cfg, "-o", "o", "sweep", "--param", "b-field"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = rows(&dir.path().join("o/fringe_area.csv"));
    assert_eq!(table.len(), 25);
    assert!(table.iter().all(|r| r.len() == 2 && r[1].is_finite()));
    let fit = json(&dir.path().join("o/fringe_fit_area.json"));
    let period = fit["period"].as_f64().unwrap();
    // 12 random-phase shots per point leave a few percent of residual jitter
    assert!((period / 10.638e-6 - 1.0).abs() < 0.05, "period {period}");
}

#[test]
fn pointwise_keeps_visibility_at_high_detuning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let mut last = Vec::new();
    for mode in ["area", "pointwise"] {
        let out = atomlight(
            dir.path(),
            &[
                "-c",
                &cfg,
                "-o",
                "o",
                "sweep",
                "--param",
                "delta-omega",
                "--mode",
                mode,
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let table = rows(&dir.path().join(format!("o/visibility_{mode}.csv")));
        assert_eq!(table.len(), 2);
        last.push(table[1][1]);
    }
    assert!(last[0] < 0.1, "area visibility at 4 MHz {}", last[0]);
    assert!(last[1] > 0.9, "pointwise visibility at 4 MHz {}", last[1]);
}

#[test]
fn same_config_and_seed_reproduce_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    for out_dir in ["a", "b"] {
        let out = atomlight(
            dir.path(),
            &["-c", &cfg, "-o", out_dir, "sweep", "--param", "b-field"],
        );
        assert!(out.status.success());
    }
    let a = fs::read(dir.path().join("a/fringe_area.csv")).unwrap();
    let b = fs::read(dir.path().join("b/fringe_area.csv")).unwrap();
    assert_eq!(a, b);
    let out = atomlight(
        dir.path(),
        &[
            "-c", &cfg, "-o", "c", "--seed", "6", "sweep", "--param", "b-field",
        ],
    );
    assert!(out.status.success());
    assert_ne!(a, fs::read(dir.path().join("c/fringe_area.csv")).unwrap());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_atomlight"))
        .args(["-c", &cfg, "--quiet", "analyze"])
        .current_dir(dir.path())
        .env("ALHI_OUT", dir.path().join("from-env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/shots.csv").exists());
}

#[test]
fn sample_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let out = atomlight(
        dir.path(),
        &["-c", cfg.to_str().unwrap(), "-o", "o", "analyze"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(rows(&dir.path().join("o/shots.csv")).len(), 100);
}
