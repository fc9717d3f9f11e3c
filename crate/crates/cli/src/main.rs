use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use atomlight::analysis::{
    fit_fringe, fringe_sweep, integrate_area, shot_powers, storage_sweep, visibility_sweep,
    DelayMode, PipelineMode, PrecisionCurve,
};
use atomlight::io::{
    load_batch, load_config, save_batch, write_atomic, write_table, ConfigError, RunConfig,
    TraceFormat, Violation,
};
use atomlight::sequencer::{delay_line_cost, run_batch};
use atomlight::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "atomlight",
    version,
    about = "Heterodyne atom-light interferometer simulator"
)]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the configuration).
    #[arg(short, long, global = true, env = "ALHI_OUT")]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Area,
    Pointwise,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Param {
    BField,
    DeltaOmega,
    StorageTime,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one batch of shots at the configured field and save the traces.
    Simulate {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Per-shot scalars and the mean power of a batch.
    Analyze {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Directory written by `simulate`; a fresh batch is simulated otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sweep the field, LO detuning or storage time.
    Sweep {
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Fit a fringe to a two-column CSV of field (T) and power.
    Fit { input: PathBuf },
    /// Field uncertainty versus storage time.
    Precision {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

enum Failure {
    Usage(String),
    Config(String, Vec<Violation>),
    /// Unreadable input or unwritable output.
    Io(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Config(..) | Failure::Io(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn record(&self) -> serde_json::Value {
        let (kind, message, violations) = match self {
            Failure::Usage(m) => ("usage", m.clone(), vec![]),
            Failure::Config(m, v) => ("config", m.clone(), v.clone()),
            Failure::Io(m) => ("io", m.clone(), vec![]),
            Failure::Numeric(m) => ("numeric", m.clone(), vec![]),
        };
        json!({
            "error": {
                "kind": kind,
                "exit_code": self.code(),
                "message": message,
                "violations": violations,
            }
        })
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(ConfigError::Invalid(v)) => {
                Failure::Config(format!("{} configuration violation(s)", v.len()), v)
            }
            Error::Config(c) => Failure::Config(c.to_string(), vec![]),
            e @ (Error::TraceIo(_) | Error::BatchIo(_)) => Failure::Io(e.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

macro_rules! lib_err {
    ($e:expr) => {
        $e.map_err(|e| Failure::from(Error::from(e)))
    };
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn with_mode(cfg: &mut RunConfig, mode: Option<Mode>) {
    let normalize = match cfg.analysis.pipeline {
        PipelineMode::Area { normalize } | PipelineMode::Pointwise { normalize, .. } => normalize,
    };
    match mode {
        Some(Mode::Area) => cfg.analysis.pipeline = PipelineMode::Area { normalize },
        Some(Mode::Pointwise)
            if !matches!(cfg.analysis.pipeline, PipelineMode::Pointwise { .. }) =>
        {
            cfg.analysis.pipeline = PipelineMode::Pointwise {
                delay: DelayMode::Nearest,
                normalize,
            };
        }
        _ => {}
    }
}

fn mode_name(cfg: &RunConfig) -> &'static str {
    match cfg.analysis.pipeline {
        PipelineMode::Area { .. } => "area",
        PipelineMode::Pointwise { .. } => "pointwise",
    }
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    artifacts: Vec<String>,
}

impl Run {
    fn table(
        &mut self,
        name: &str,
        comments: &[String],
        header: &[&str],
        rows: &[Vec<f64>],
    ) -> Result<(), Failure> {
        let path = self.out.join(name);
        write_table(&path, comments, header, rows).map_err(|e| io_err(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let path = self.out.join(name);
        let text = serde_json::to_string_pretty(value).expect("json value");
        write_atomic(&path, text.as_bytes()).map_err(|e| io_err(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn simulate(run: &mut Run, format: Format) -> Result<(), Failure> {
    let c = &run.cfg;
    let batch = lib_err!(run_batch(
        &c.sequence,
        &c.memory,
        &c.lo,
        &c.detector,
        c.b_field,
        c.seed
    ))?;
    let format = match format {
        Format::Csv => TraceFormat::Csv,
        Format::Bin => TraceFormat::Binary,
    };
    lib_err!(save_batch(&run.out.join("batch"), &batch, format))?;
    run.artifacts.push("batch/manifest.json".into());
    log::info!(
        "simulated {} shots at B = {:e} T into {}",
        batch.len(),
        c.b_field,
        run.out.join("batch").display()
    );
    Ok(())
}

fn analyze(run: &mut Run, input: Option<&Path>) -> Result<(), Failure> {
    let setup = run.cfg.setup();
    let batch = match input {
        Some(dir) => lib_err!(load_batch(dir))?,
        None => lib_err!(setup.batch(run.cfg.b_field, run.cfg.seed))?,
    };
    let w = setup.window_for(&batch);
    let powers = lib_err!(shot_powers(&batch, &w, &setup.pipeline))?;
    let mean = powers.iter().sum::<f64>() / powers.len() as f64;
    let mode = mode_name(&run.cfg);
    let comments = vec![
        format!("mode: {mode}"),
        format!(
            "window_s: [{:e}, {:e}], electronic_delay_s: {:e}",
            w.start, w.end, w.electronic_delay
        ),
        format!("mean_power: {mean:e}"),
    ];
    match setup.pipeline {
        PipelineMode::Area { .. } => {
            let areas = lib_err!(integrate_area(&batch, &w))?;
            let rows: Vec<Vec<f64>> = batch
                .shots
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    vec![
                        k as f64,
                        s.b_field,
                        s.drift_phase,
                        areas.t[k],
                        areas.r[k],
                        powers[k],
                    ]
                })
                .collect();
            run.table(
                "shots.csv",
                &comments,
                &[
                    "shot",
                    "b_field_t",
                    "drift_phase_rad",
                    "area_t",
                    "area_r",
                    "shot_power",
                ],
                &rows,
            )?;
        }
        PipelineMode::Pointwise { .. } => {
            let rows: Vec<Vec<f64>> = batch
                .shots
                .iter()
                .enumerate()
                .map(|(k, s)| vec![k as f64, s.b_field, s.drift_phase, powers[k]])
                .collect();
            run.table(
                "shots.csv",
                &comments,
                &["shot", "b_field_t", "drift_phase_rad", "shot_power"],
                &rows,
            )?;
        }
    }
    run.json(
        "analysis.json",
        &json!({ "mode": mode, "shots": batch.len(), "window": w, "mean_power": mean }),
    )?;
    log::info!(
        "{mode} pipeline: mean power {mean:e} over {} shots",
        batch.len()
    );
    Ok(())
}

fn sweep(run: &mut Run, param: Param) -> Result<(), Failure> {
    let c = run.cfg.clone();
    let setup = c.setup();
    let n = c.sweep.points;
    let b: Vec<f64> = (0..n)
        .map(|i| c.sweep.b_start + (c.sweep.b_end - c.sweep.b_start) * i as f64 / (n - 1) as f64)
        .collect();
    let mode = mode_name(&c);
    match param {
        Param::BField => {
            let pts = lib_err!(fringe_sweep(&setup, &b, c.seed))?;
            let fit = lib_err!(fit_fringe(&pts, c.memory.gamma, c.memory.storage_time))?;
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
            run.table(
                &format!("fringe_{mode}.csv"),
                &[
                    format!("mode: {mode}"),
                    format!("storage_time_s: {:e}", c.memory.storage_time),
                    format!("detuning_hz: {:e}", c.lo.detuning_hz()),
                ],
                &["b_field_t", "mean_power"],
                &rows,
            )?;
            run.json(&format!("fringe_fit_{mode}.json"), &json!(fit))?;
            log::info!(
                "fringe: visibility {:.4} ± {:.4}, period {:e} T",
                fit.visibility,
                fit.errors.visibility,
                fit.period
            );
        }
        Param::DeltaOmega => {
            let v = lib_err!(visibility_sweep(&setup, &c.sweep.detunings_hz, &b, c.seed))?;
            let rows: Vec<Vec<f64>> = v
                .iter()
                .map(|p| {
                    vec![
                        p.detuning_hz,
                        p.referenced_visibility,
                        p.fit.visibility,
                        p.fit.errors.visibility,
                        p.fit.offset,
                        p.fit.phase,
                    ]
                })
                .collect();
            run.table(
                &format!("visibility_{mode}.csv"),
                &[
                    format!("mode: {mode}"),
                    "referenced_visibility: fringe amplitude over the mean power at the first detuning".into(),
                ],
                &[
                    "detuning_hz",
                    "referenced_visibility",
                    "fitted_visibility",
                    "fitted_visibility_error",
                    "offset",
                    "phase_rad",
                ],
                &rows,
            )?;
            for p in &v {
                log::info!(
                    "δf = {:e} Hz: referenced visibility {:.4}",
                    p.detuning_hz,
                    p.referenced_visibility
                );
            }
        }
        Param::StorageTime => {
            let s = lib_err!(storage_sweep(
                &setup,
                &c.sweep.storage_times,
                c.sweep.points,
                (c.sweep.b_end - c.sweep.b_start) / atomlight::sequencer::fringe_period(&c.memory),
                &c.precision.options,
                c.seed
            ))?;
            let rows: Vec<Vec<f64>> = s
                .curve
                .rows
                .iter()
                .zip(&s.fits)
                .map(|(r, f)| {
                    vec![
                        r.storage_time,
                        f.visibility,
                        f.offset,
                        f.period,
                        r.delta_b,
                        r.spread,
                    ]
                })
                .collect();
            run.table(
                &format!("storage_{mode}.csv"),
                &[
                    format!("mode: {mode}"),
                    format!(
                        "exponent: {:e} ± {:e}",
                        s.curve.exponent, s.curve.exponent_error
                    ),
                ],
                &[
                    "storage_time_s",
                    "visibility",
                    "offset",
                    "period_t",
                    "delta_b_t",
                    "delta_b_spread_t",
                ],
                &rows,
            )?;
        }
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (
            cols.first().map(|x| x.parse::<f64>()),
            cols.get(1).map(|x| x.parse::<f64>()),
        );
        match parsed {
            (Some(Ok(b)), Some(Ok(p))) => pts.push((b, p)),
            // a non-numeric first row is a column header
            _ if pts.is_empty() && i < 64 => continue,
            _ => {
                return Err(Failure::Usage(format!(
                    "{}:{}: expected two numeric columns",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(pts)
}

fn fit(run: &mut Run, input: &Path) -> Result<(), Failure> {
    let pts = read_points(input)?;
    let c = &run.cfg;
    let fit = lib_err!(fit_fringe(&pts, c.memory.gamma, c.memory.storage_time))?;
    run.json(
        "fit.json",
        &json!({ "input": input, "points": pts.len(), "fit": fit }),
    )?;
    if fit.phase_indeterminate {
        log::warn!("no fringe contrast; the fringe phase is indeterminate");
    }
    log::info!(
        "visibility {:.4} ± {:.4}, phase {:.4} rad, period {:e} T",
        fit.visibility,
        fit.errors.visibility,
        fit.phase,
        fit.period
    );
    Ok(())
}

fn precision(run: &mut Run) -> Result<(), Failure> {
    let c = run.cfg.clone();
    let p = &c.precision;
    let s = lib_err!(storage_sweep(
        &c.setup(),
        &p.storage_times,
        p.sweep_points,
        p.periods,
        &p.options,
        c.seed
    ))?;
    let mut rows = Vec::new();
    let mut costs = Vec::new();
    for r in &s.curve.rows {
        let (km, db) = lib_err!(delay_line_cost(
            r.storage_time,
            p.fiber_attenuation,
            p.fiber_speed
        ))?;
        costs.push(json!({ "storage_time": r.storage_time, "fiber_km": km, "fiber_loss_db": db }));
        rows.push(vec![
            r.storage_time,
            r.delta_b,
            r.spread,
            r.power_std,
            r.slope,
            r.operating_point,
            km,
            db,
        ]);
    }
    let curve: &PrecisionCurve = &s.curve;
    run.table(
        "precision.csv",
        &[
            format!("mode: {}", mode_name(&c)),
            format!(
                "exponent: {:e} ± {:e}",
                curve.exponent, curve.exponent_error
            ),
            format!(
                "fiber: {} dB/km at {:e} m/s",
                p.fiber_attenuation, p.fiber_speed
            ),
        ],
        &[
            "storage_time_s",
            "delta_b_t",
            "delta_b_spread_t",
            "power_std",
            "slope_per_t",
            "operating_point_t",
            "fiber_length_km",
            "fiber_loss_db",
        ],
        &rows,
    )?;
    run.json(
        "precision.json",
        &json!({ "curve": curve, "fits": s.fits, "delay_line": costs }),
    )?;
    log::info!(
        "δB ∝ Δτ^{:.4} (± {:.4})",
        curve.exponent,
        curve.exponent_error
    );
    Ok(())
}

fn execute(cli: &Cli, argv: &[String]) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => lib_err!(load_config(p))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let mode = match &cli.command {
        Command::Analyze { mode, .. }
        | Command::Sweep { mode, .. }
        | Command::Precision { mode } => *mode,
        _ => None,
    };
    with_mode(&mut cfg, mode);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("atomlight-out"));
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut run = Run {
        cfg,
        out,
        artifacts: Vec::new(),
    };
    let command = match &cli.command {
        Command::Simulate { format } => {
            simulate(&mut run, *format)?;
            "simulate"
        }
        Command::Analyze { input, .. } => {
            analyze(&mut run, input.as_deref())?;
            "analyze"
        }
        Command::Sweep { param, .. } => {
            sweep(&mut run, *param)?;
            "sweep"
        }
        Command::Fit { input } => {
            fit(&mut run, input)?;
            "fit"
        }
        Command::Precision { .. } => {
            precision(&mut run)?;
            "precision"
        }
    };
    let record = json!({
        "command": command,
        "argv": argv,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": run.cfg.seed,
        "config": run.cfg,
        "artifacts": run.artifacts,
    });
    let path = run.out.join("run.json");
    let text = serde_json::to_string_pretty(&record).expect("json value");
    write_atomic(&path, text.as_bytes()).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let f = Failure::Usage(e.to_string().trim().to_string());
            eprintln!("{}", f.record());
            return ExitCode::from(f.code());
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Error
        } else {
            log::LevelFilter::Info
        })
        .parse_env("RUST_LOG")
        .format_target(false)
        .init();
    match execute(&cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.record());
            ExitCode::from(f.code())
        }
    }
}
