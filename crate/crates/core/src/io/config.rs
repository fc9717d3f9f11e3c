use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use super::units::{parse_quantity, Dimension};
use crate::analysis::{DelayMode, PipelineMode, PrecisionOptions, SweepSetup, WindowSpec};
use crate::sequencer::{
    balanced_split, DecayLaw, DriftModel, MemoryConfig, SequenceConfig, SequenceMode,
};
use crate::signal::{DetectorModel, DetectorResponse, LoConfig, PulseShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    UnknownKey,
    Type,
    Unit,
    Range,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Dotted key path, or several joined by `, ` when a constraint couples them.
    pub key: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} configuration violation(s): {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub pipeline: PipelineMode,
    /// `None` derives the window from the pulse layout.
    pub window: Option<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub b_start: f64,
    pub b_end: f64,
    pub points: usize,
    pub detunings_hz: Vec<f64>,
    pub storage_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub storage_times: Vec<f64>,
    pub options: PrecisionOptions,
    pub sweep_points: usize,
    pub periods: f64,
    /// dB/km.
    pub fiber_attenuation: f64,
    /// m/s.
    pub fiber_speed: f64,
}

/// A fully resolved run: every quantity in SI (detunings in rad/s inside
/// [`LoConfig`], Hz in the sweep lists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub sequence: SequenceConfig,
    pub memory: MemoryConfig,
    pub lo: LoConfig,
    pub detector: DetectorModel,
    pub analysis: AnalysisConfig,
    pub b_field: f64,
    pub sweep: SweepConfig,
    pub precision: PrecisionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let memory = MemoryConfig::default();
        let sequence = SequenceConfig {
            split: balanced_split(&memory),
            ..Default::default()
        };
        let period = crate::sequencer::fringe_period(&memory);
        Self {
            seed: 1,
            out_dir: None,
            sequence,
            memory,
            lo: LoConfig::new(1.0, 5e3),
            detector: DetectorModel::ideal(100e6),
            analysis: AnalysisConfig {
                pipeline: PipelineMode::area(),
                window: None,
            },
            b_field: 0.0,
            sweep: SweepConfig {
                b_start: 0.0,
                b_end: 2.0 * period,
                points: 121,
                detunings_hz: vec![5e3, 1e6, 2e6, 3e6, 4e6],
                storage_times: vec![3e-6, 4e-6, 5e-6],
            },
            precision: PrecisionConfig {
                storage_times: vec![1e-6, 2e-6, 3e-6, 4e-6, 5e-6],
                options: PrecisionOptions::default(),
                sweep_points: 41,
                periods: 2.0,
                fiber_attenuation: 3.0,
                fiber_speed: 2e8,
            },
        }
    }
}

impl RunConfig {
    pub fn setup(&self) -> SweepSetup {
        SweepSetup {
            sequence: self.sequence.clone(),
            memory: self.memory,
            lo: self.lo,
            detector: self.detector.clone(),
            pipeline: self.analysis.pipeline,
            window: self.analysis.window,
        }
    }
}

const ROOT_KEYS: &[&str] = &[
    "seed",
    "out_dir",
    "sequence",
    "memory",
    "lo",
    "detector",
    "analysis",
    "field",
    "sweep",
    "precision",
];
const SEQUENCE_KEYS: &[&str] = &[
    "mode",
    "write_width",
    "read_width",
    "window",
    "repetitions",
    "drift",
    "drift_step",
    "pulse_shape",
    "pulse_fwhm",
    "pulse_rms",
    "pulse_rise",
    "pulse_fall",
    "input_intensity",
    "split",
    "r2_scale",
    "compensate_decay",
];
const MEMORY_KEYS: &[&str] = &[
    "gyromagnetic_ratio",
    "lifetime",
    "decay",
    "storage_time",
    "efficiency",
];
const LO_KEYS: &[&str] = &["amplitude", "detuning", "phase"];
const DETECTOR_KEYS: &[&str] = &[
    "response",
    "bandwidth",
    "gain",
    "sample_rate",
    "noise_rms",
    "noise_fraction",
];
const ANALYSIS_KEYS: &[&str] = &[
    "mode",
    "normalize",
    "delay",
    "window_start",
    "window_end",
    "electronic_delay",
];
const FIELD_KEYS: &[&str] = &["b"];
const SWEEP_KEYS: &[&str] = &[
    "b_start",
    "b_end",
    "periods",
    "points",
    "detunings",
    "storage_times",
];
const PRECISION_KEYS: &[&str] = &[
    "storage_times",
    "repeats",
    "batches_per_repeat",
    "sweep_points",
    "periods",
    "fiber_attenuation",
    "fiber_speed",
];

struct Reader {
    errors: Vec<Violation>,
}

impl Reader {
    fn push(&mut self, key: impl Into<String>, kind: ViolationKind, message: impl Into<String>) {
        self.errors.push(Violation {
            key: key.into(),
            kind,
            message: message.into(),
        });
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str, allowed: &[&str]) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.push(
                            format!("{name}.{k}"),
                            ViolationKind::UnknownKey,
                            format!("unknown key; expected one of: {}", allowed.join(", ")),
                        );
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.push(name, ViolationKind::Type, "expected a table");
                None
            }
        }
    }

    fn quantity(&mut self, t: Option<&Table>, sec: &str, key: &str, dim: Dimension) -> Option<f64> {
        match t?.get(key)? {
            Value::String(s) => match parse_quantity(s, dim) {
                Ok(v) => Some(v),
                Err(e) => {
                    self.push(format!("{sec}.{key}"), ViolationKind::Unit, e.0);
                    None
                }
            },
            Value::Integer(_) | Value::Float(_) => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Unit,
                    format!(
                        "a {} needs a unit suffix, written as a string such as \"5{}\"",
                        dim.name(),
                        dim.suffixes().split(", ").next().unwrap_or("")
                    ),
                );
                None
            }
            _ => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Type,
                    format!("expected a {} string with a unit", dim.name()),
                );
                None
            }
        }
    }

    fn quantity_list(
        &mut self,
        t: Option<&Table>,
        sec: &str,
        key: &str,
        dim: Dimension,
    ) -> Option<Vec<f64>> {
        match t?.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for (i, item) in items.iter().enumerate() {
                    match item.as_str().map(|s| parse_quantity(s, dim)) {
                        Some(Ok(v)) => out.push(v),
                        Some(Err(e)) => {
                            ok = false;
                            self.push(format!("{sec}.{key}[{i}]"), ViolationKind::Unit, e.0);
                        }
                        None => {
                            ok = false;
                            self.push(
                                format!("{sec}.{key}[{i}]"),
                                ViolationKind::Type,
                                format!("expected a {} string with a unit", dim.name()),
                            );
                        }
                    }
                }
                ok.then_some(out)
            }
            _ => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Type,
                    "expected an array of strings",
                );
                None
            }
        }
    }

    fn number(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<f64> {
        match t?.get(key)? {
            Value::Integer(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Type,
                    "expected a number",
                );
                None
            }
        }
    }

    fn count(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<usize> {
        match t?.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(_) => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Range,
                    "must be non-negative",
                );
                None
            }
            _ => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Type,
                    "expected an integer",
                );
                None
            }
        }
    }

    fn boolean(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<bool> {
        match t?.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Type,
                    "expected true or false",
                );
                None
            }
        }
    }

    fn choice(
        &mut self,
        t: Option<&Table>,
        sec: &str,
        key: &str,
        options: &[&str],
    ) -> Option<String> {
        match t?.get(key)? {
            Value::String(s) if options.contains(&s.as_str()) => Some(s.clone()),
            _ => {
                self.push(
                    format!("{sec}.{key}"),
                    ViolationKind::Type,
                    format!("expected one of: {}", options.join(", ")),
                );
                None
            }
        }
    }

    fn positive(&mut self, key: &str, v: f64) {
        if !(v > 0.0) || !v.is_finite() {
            self.push(
                key,
                ViolationKind::Range,
                format!("must be positive, got {v:e}"),
            );
        }
    }

    fn non_negative(&mut self, key: &str, v: f64) {
        if !(v >= 0.0) || !v.is_finite() {
            self.push(
                key,
                ViolationKind::Range,
                format!("must be non-negative, got {v:e}"),
            );
        }
    }
}

fn parse_error(text: &str, origin: &str, e: toml::de::Error) -> ConfigError {
    let offset = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ConfigError::Parse {
        origin: origin.to_string(),
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Parse and validate configuration text. Missing keys keep their defaults;
/// every violation found is reported together.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = toml::from_str(text).map_err(|e| parse_error(text, origin, e))?;
    let mut r = Reader { errors: Vec::new() };
    let mut cfg = RunConfig::default();

    for k in root.keys() {
        if !ROOT_KEYS.contains(&k.as_str()) {
            r.push(
                k.clone(),
                ViolationKind::UnknownKey,
                format!("unknown key; expected one of: {}", ROOT_KEYS.join(", ")),
            );
        }
    }
    match root.get("seed") {
        None => {}
        Some(Value::Integer(s)) if *s >= 0 => cfg.seed = *s as u64,
        Some(_) => r.push(
            "seed",
            ViolationKind::Type,
            "expected a non-negative integer",
        ),
    }
    match root.get("out_dir") {
        None => {}
        Some(Value::String(s)) => cfg.out_dir = Some(PathBuf::from(s)),
        Some(_) => r.push("out_dir", ViolationKind::Type, "expected a path string"),
    }

    // memory first: the balanced split depends on it
    let m = r.section(&root, "memory", MEMORY_KEYS);
    if let Some(v) = r.quantity(m, "memory", "gyromagnetic_ratio", Dimension::Gyromagnetic) {
        cfg.memory.gamma = v;
    }
    if let Some(v) = r.quantity(m, "memory", "lifetime", Dimension::Time) {
        cfg.memory.lifetime = v;
    }
    if let Some(v) = r.quantity(m, "memory", "storage_time", Dimension::Time) {
        cfg.memory.storage_time = v;
    }
    if let Some(v) = r.number(m, "memory", "efficiency") {
        cfg.memory.efficiency = v;
    }
    match r
        .choice(m, "memory", "decay", &["exponential", "gaussian"])
        .as_deref()
    {
        Some("gaussian") => cfg.memory.decay = DecayLaw::Gaussian,
        Some(_) => cfg.memory.decay = DecayLaw::Exponential,
        None => {}
    }
    r.positive("memory.gyromagnetic_ratio", cfg.memory.gamma.abs());
    r.positive("memory.lifetime", cfg.memory.lifetime);
    r.non_negative("memory.storage_time", cfg.memory.storage_time);
    if !(0.0..=1.0).contains(&cfg.memory.efficiency) {
        r.push(
            "memory.efficiency",
            ViolationKind::Range,
            "must lie in [0, 1]",
        );
    }

    let s = r.section(&root, "sequence", SEQUENCE_KEYS);
    let seq = &mut cfg.sequence;
    if let Some(v) = r.quantity(s, "sequence", "write_width", Dimension::Time) {
        seq.write_width = v;
    }
    if let Some(v) = r.quantity(s, "sequence", "read_width", Dimension::Time) {
        seq.read_width = v;
    }
    if let Some(v) = r.quantity(s, "sequence", "window", Dimension::Time) {
        seq.window = v;
    }
    if let Some(v) = r.count(s, "sequence", "repetitions") {
        seq.repetitions = v;
    }
    if let Some(v) = r.number(s, "sequence", "input_intensity") {
        seq.input_intensity = v;
    }
    match s.and_then(|t| t.get("split")) {
        None => seq.split = balanced_split(&cfg.memory),
        Some(Value::String(x)) if x == "balanced" => seq.split = balanced_split(&cfg.memory),
        Some(Value::Integer(i)) => seq.split = *i as f64,
        Some(Value::Float(f)) => seq.split = *f,
        Some(_) => r.push(
            "sequence.split",
            ViolationKind::Type,
            "expected a number in [0, 1] or \"balanced\"",
        ),
    }
    let mode = r.choice(s, "sequence", "mode", &["transmit-retrieve", "multipulse"]);
    let r2_scale = r.number(s, "sequence", "r2_scale");
    let compensate = r.boolean(s, "sequence", "compensate_decay");
    if mode.as_deref() == Some("multipulse") {
        seq.mode = SequenceMode::Multipulse {
            r2_scale: r2_scale.unwrap_or(1.0),
            compensate_decay: compensate.unwrap_or(false),
        };
    } else if r2_scale.is_some() || compensate.is_some() {
        r.push(
            "sequence.mode",
            ViolationKind::Conflict,
            "r2_scale and compensate_decay need mode = \"multipulse\"",
        );
    }
    let drift = r.choice(
        s,
        "sequence",
        "drift",
        &["none", "uniform", "random-walk", "lo-beat"],
    );
    let step = r.quantity(s, "sequence", "drift_step", Dimension::Angle);
    seq.drift = match drift.as_deref() {
        Some("none") => DriftModel::None,
        Some("random-walk") => DriftModel::RandomWalk {
            step: step.unwrap_or(0.1),
        },
        Some("lo-beat") => DriftModel::LoBeat,
        _ => DriftModel::Uniform,
    };
    if step.is_some() && drift.as_deref() != Some("random-walk") {
        r.push(
            "sequence.drift_step",
            ViolationKind::Conflict,
            "drift_step needs drift = \"random-walk\"",
        );
    }
    let shape = r.choice(s, "sequence", "pulse_shape", &["gaussian", "emg"]);
    let fwhm = r.quantity(s, "sequence", "pulse_fwhm", Dimension::Time);
    let rms = r.quantity(s, "sequence", "pulse_rms", Dimension::Time);
    let rise = r.quantity(s, "sequence", "pulse_rise", Dimension::Time);
    let fall = r.quantity(s, "sequence", "pulse_fall", Dimension::Time);
    if shape.as_deref() == Some("emg") {
        if fwhm.is_some() || rms.is_some() {
            r.push(
                "sequence.pulse_shape",
                ViolationKind::Conflict,
                "an emg pulse takes pulse_rise and pulse_fall, not a width",
            );
        }
        match (rise, fall) {
            (Some(a), Some(b)) => {
                r.positive("sequence.pulse_rise", a);
                r.positive("sequence.pulse_fall", b);
                seq.pulse = PulseShape::exp_mod_gaussian(0.0, a, b);
            }
            _ => r.push(
                "sequence.pulse_rise, sequence.pulse_fall",
                ViolationKind::Conflict,
                "an emg pulse needs both pulse_rise and pulse_fall",
            ),
        }
    } else {
        if rise.is_some() || fall.is_some() {
            r.push(
                "sequence.pulse_shape",
                ViolationKind::Conflict,
                "pulse_rise and pulse_fall need pulse_shape = \"emg\"",
            );
        }
        match (fwhm, rms) {
            (Some(_), Some(_)) => r.push(
                "sequence.pulse_fwhm, sequence.pulse_rms",
                ViolationKind::Conflict,
                "give the pulse width once",
            ),
            (Some(w), None) => {
                r.positive("sequence.pulse_fwhm", w);
                seq.pulse = PulseShape::gaussian_fwhm(0.0, w);
            }
            (None, Some(w)) => {
                r.positive("sequence.pulse_rms", w);
                seq.pulse = PulseShape::gaussian(0.0, w);
            }
            (None, None) => {}
        }
    }
    if seq.repetitions == 0 {
        r.push(
            "sequence.repetitions",
            ViolationKind::Range,
            "must be at least 1",
        );
    }
    r.positive("sequence.write_width", seq.write_width);
    r.positive("sequence.read_width", seq.read_width);
    r.positive("sequence.window", seq.window);
    r.non_negative("sequence.input_intensity", seq.input_intensity);
    if !(0.0..=1.0).contains(&seq.split) {
        r.push("sequence.split", ViolationKind::Range, "must lie in [0, 1]");
    }
    let fits = |seq: &SequenceConfig, tau: f64| {
        seq.write_width + seq.read_width + tau <= seq.window * (1.0 + 1e-12)
    };
    if cfg.memory.storage_time >= 0.0 && !fits(&cfg.sequence, cfg.memory.storage_time) {
        let seq = &cfg.sequence;
        r.push(
            "memory.storage_time, sequence.window",
            ViolationKind::Range,
            format!(
                "write_width + read_width + storage_time = {:e} s exceeds window = {:e} s",
                seq.write_width + seq.read_width + cfg.memory.storage_time,
                seq.window
            ),
        );
    }

    let l = r.section(&root, "lo", LO_KEYS);
    if let Some(v) = r.number(l, "lo", "amplitude") {
        cfg.lo.amplitude = v;
    }
    if let Some(v) = r.quantity(l, "lo", "detuning", Dimension::Frequency) {
        cfg.lo.detuning = std::f64::consts::TAU * v;
    }
    if let Some(v) = r.quantity(l, "lo", "phase", Dimension::Angle) {
        cfg.lo.phase = v;
    }
    r.positive("lo.amplitude", cfg.lo.amplitude);

    let d = r.section(&root, "detector", DETECTOR_KEYS);
    if let Some(v) = r.quantity(d, "detector", "sample_rate", Dimension::Frequency) {
        cfg.detector.sample_rate = v;
    }
    if let Some(v) = r.number(d, "detector", "gain") {
        cfg.detector.gain = v;
    }
    let response = r.choice(d, "detector", "response", &["delta", "gaussian"]);
    let bandwidth = r.quantity(d, "detector", "bandwidth", Dimension::Frequency);
    match (response.as_deref(), bandwidth) {
        (Some("gaussian"), Some(b)) => {
            r.positive("detector.bandwidth", b);
            cfg.detector.response = DetectorResponse::GaussianLowpass { bandwidth_hz: b };
        }
        (Some("gaussian"), None) => r.push(
            "detector.bandwidth",
            ViolationKind::Conflict,
            "a gaussian detector needs a bandwidth",
        ),
        (_, Some(_)) => r.push(
            "detector.bandwidth",
            ViolationKind::Conflict,
            "bandwidth needs response = \"gaussian\"",
        ),
        _ => cfg.detector.response = DetectorResponse::Delta,
    }
    r.positive("detector.sample_rate", cfg.detector.sample_rate);
    r.positive("detector.gain", cfg.detector.gain);
    let noise_rms = r.number(d, "detector", "noise_rms");
    let noise_fraction = r.number(d, "detector", "noise_fraction");
    if noise_rms.is_some() && noise_fraction.is_some() {
        r.push(
            "detector.noise_rms, detector.noise_fraction",
            ViolationKind::Conflict,
            "give the noise level once",
        );
    }
    if let Some(v) = noise_rms {
        r.non_negative("detector.noise_rms", v);
        cfg.detector.noise_rms = v;
    }
    if let Some(v) = noise_fraction {
        r.non_negative("detector.noise_fraction", v);
    }
    if cfg.detector.sample_rate > 0.0
        && cfg.lo.detuning.abs() / std::f64::consts::TAU >= 0.5 * cfg.detector.sample_rate
    {
        r.push(
            "lo.detuning, detector.sample_rate",
            ViolationKind::Range,
            "detuning is at or above the Nyquist frequency",
        );
    }

    let a = r.section(&root, "analysis", ANALYSIS_KEYS);
    let amode = r.choice(a, "analysis", "mode", &["area", "pointwise"]);
    let normalize = r.boolean(a, "analysis", "normalize").unwrap_or(false);
    let delay = r.choice(a, "analysis", "delay", &["nearest", "fractional"]);
    cfg.analysis.pipeline = if amode.as_deref() == Some("pointwise") {
        PipelineMode::Pointwise {
            delay: if delay.as_deref() == Some("fractional") {
                DelayMode::Fractional
            } else {
                DelayMode::Nearest
            },
            normalize,
        }
    } else {
        if delay.is_some() {
            r.push(
                "analysis.delay",
                ViolationKind::Conflict,
                "delay applies to mode = \"pointwise\" only",
            );
        }
        PipelineMode::Area { normalize }
    };
    let w0 = r.quantity(a, "analysis", "window_start", Dimension::Time);
    let w1 = r.quantity(a, "analysis", "window_end", Dimension::Time);
    let we = r.quantity(a, "analysis", "electronic_delay", Dimension::Time);
    match (w0, w1) {
        (Some(s0), Some(s1)) => {
            match WindowSpec::new(s0, s1, we.unwrap_or(cfg.memory.storage_time)) {
                Ok(w) => cfg.analysis.window = Some(w),
                Err(e) => r.push(
                    "analysis.window_start, analysis.window_end",
                    ViolationKind::Range,
                    e.to_string(),
                ),
            }
        }
        (None, None) if we.is_some() => r.push(
            "analysis.electronic_delay",
            ViolationKind::Conflict,
            "electronic_delay needs window_start and window_end",
        ),
        (None, None) => {}
        _ => r.push(
            "analysis.window_start, analysis.window_end",
            ViolationKind::Conflict,
            "give both window_start and window_end, or neither",
        ),
    }

    let f = r.section(&root, "field", FIELD_KEYS);
    if let Some(v) = r.quantity(f, "field", "b", Dimension::MagneticField) {
        cfg.b_field = v;
    }

    let w = r.section(&root, "sweep", SWEEP_KEYS);
    let period = crate::sequencer::fringe_period(&cfg.memory);
    if let Some(v) = r.quantity(w, "sweep", "b_start", Dimension::MagneticField) {
        cfg.sweep.b_start = v;
    }
    let b_end = r.quantity(w, "sweep", "b_end", Dimension::MagneticField);
    let periods = r.number(w, "sweep", "periods");
    cfg.sweep.b_end = match (b_end, periods) {
        (Some(_), Some(_)) => {
            r.push(
                "sweep.b_end, sweep.periods",
                ViolationKind::Conflict,
                "give the sweep span once",
            );
            cfg.sweep.b_start
        }
        (Some(e), None) => e,
        (None, Some(p)) => {
            r.positive("sweep.periods", p);
            cfg.sweep.b_start + p * period
        }
        (None, None) => cfg.sweep.b_start + 2.0 * period,
    };
    if !(cfg.sweep.b_end > cfg.sweep.b_start) && (b_end.is_some() || periods.is_some()) {
        r.push("sweep.b_end", ViolationKind::Range, "must exceed b_start");
    }
    if let Some(v) = r.count(w, "sweep", "points") {
        cfg.sweep.points = v;
    }
    if cfg.sweep.points < 2 {
        r.push(
            "sweep.points",
            ViolationKind::Range,
            "need at least 2 points",
        );
    }
    if let Some(v) = r.quantity_list(w, "sweep", "detunings", Dimension::Frequency) {
        cfg.sweep.detunings_hz = v;
    }
    if let Some(v) = r.quantity_list(w, "sweep", "storage_times", Dimension::Time) {
        cfg.sweep.storage_times = v;
    }

    let p = r.section(&root, "precision", PRECISION_KEYS);
    if let Some(v) = r.quantity_list(p, "precision", "storage_times", Dimension::Time) {
        cfg.precision.storage_times = v;
    }
    if let Some(v) = r.count(p, "precision", "repeats") {
        cfg.precision.options.repeats = v;
    }
    if let Some(v) = r.count(p, "precision", "batches_per_repeat") {
        cfg.precision.options.batches_per_repeat = v;
    }
    if let Some(v) = r.count(p, "precision", "sweep_points") {
        cfg.precision.sweep_points = v;
    }
    if let Some(v) = r.number(p, "precision", "periods") {
        cfg.precision.periods = v;
    }
    if let Some(v) = r.quantity(p, "precision", "fiber_attenuation", Dimension::Attenuation) {
        cfg.precision.fiber_attenuation = v;
    }
    if let Some(v) = r.quantity(p, "precision", "fiber_speed", Dimension::Speed) {
        cfg.precision.fiber_speed = v;
    }
    if cfg.precision.options.repeats < 10 {
        r.push(
            "precision.repeats",
            ViolationKind::Range,
            "need at least 10 repeats",
        );
    }
    if cfg.precision.options.batches_per_repeat == 0 {
        r.push(
            "precision.batches_per_repeat",
            ViolationKind::Range,
            "must be at least 1",
        );
    }
    if cfg.precision.sweep_points < 6 {
        r.push(
            "precision.sweep_points",
            ViolationKind::Range,
            "need at least 6 points",
        );
    }
    r.positive("precision.periods", cfg.precision.periods);
    r.non_negative(
        "precision.fiber_attenuation",
        cfg.precision.fiber_attenuation,
    );
    r.positive("precision.fiber_speed", cfg.precision.fiber_speed);

    for (sec, list) in [
        ("sweep.storage_times", &cfg.sweep.storage_times),
        ("precision.storage_times", &cfg.precision.storage_times),
    ] {
        for (i, &tau) in list.iter().enumerate() {
            if !(tau >= 0.0) {
                r.push(
                    format!("{sec}[{i}]"),
                    ViolationKind::Range,
                    "must be non-negative",
                );
            } else if !fits(&cfg.sequence, tau) {
                r.push(
                    format!("{sec}[{i}], sequence.window"),
                    ViolationKind::Range,
                    format!(
                        "write_width + read_width + {tau:e} s exceeds window = {:e} s",
                        cfg.sequence.window
                    ),
                );
            }
        }
    }
    for (i, &f) in cfg.sweep.detunings_hz.iter().enumerate() {
        if f.abs() >= 0.5 * cfg.detector.sample_rate {
            r.push(
                format!("sweep.detunings[{i}], detector.sample_rate"),
                ViolationKind::Range,
                "detuning is at or above the Nyquist frequency",
            );
        }
    }

    if r.errors.is_empty() {
        if let Some(frac) = noise_fraction {
            match cfg
                .sequence
                .peak_current(&cfg.memory, &cfg.lo, &cfg.detector)
            {
                Ok(peak) => cfg.detector.noise_rms = frac * peak,
                Err(e) => r.push(
                    "detector.noise_fraction",
                    ViolationKind::Range,
                    e.to_string(),
                ),
            }
        }
    }
    if r.errors.is_empty() {
        if let Err(e) = cfg.sequence.validate(cfg.memory.storage_time) {
            r.push("sequence", ViolationKind::Range, e.to_string());
        }
        if let Err(e) = cfg.memory.validate() {
            r.push("memory", ViolationKind::Range, e.to_string());
        }
        if let Err(e) = cfg.detector.validate() {
            r.push("detector", ViolationKind::Range, e.to_string());
        }
    }
    if r.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(r.errors))
    }
}
