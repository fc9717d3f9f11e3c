//! Configuration files, trace persistence and batch manifests.

mod config;
mod trace_io;
pub mod units;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    load_config, parse_config, AnalysisConfig, ConfigError, PrecisionConfig, RunConfig,
    SweepConfig, Violation, ViolationKind,
};
pub use trace_io::{
    read_trace, read_trace_bin, read_trace_csv, trace_from_bytes, trace_from_csv, trace_to_bytes,
    trace_to_csv, write_trace, write_trace_bin, write_trace_csv, TraceIoError,
    TRACE_FORMAT_VERSION,
};

use crate::sequencer::{BatchMeta, Shot, ShotBatch};

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    Csv,
    Binary,
}

impl TraceFormat {
    fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot: usize,
    pub b_field: f64,
    pub spin_phase: f64,
    pub drift_phase: f64,
    /// Paths relative to the manifest.
    pub first: PathBuf,
    pub second: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub version: u32,
    pub meta: BatchMeta,
    pub shots: Vec<ShotRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum BatchIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Trace {
        path: PathBuf,
        #[source]
        source: TraceIoError,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("manifest version {0} is not supported")]
    Version(u32),
}

/// Write every trace of `batch` plus a `manifest.json` into `dir`.
pub fn save_batch(
    dir: &Path,
    batch: &ShotBatch,
    format: TraceFormat,
) -> Result<BatchManifest, BatchIoError> {
    fs::create_dir_all(dir)?;
    let ext = format.extension();
    let mut shots = Vec::with_capacity(batch.len());
    for (k, s) in batch.shots.iter().enumerate() {
        let first = PathBuf::from(format!("shot{k:05}_{}.{ext}", s.t.meta().label));
        let second = PathBuf::from(format!("shot{k:05}_{}.{ext}", s.r.meta().label));
        for (name, trace) in [(&first, &s.t), (&second, &s.r)] {
            let path = dir.join(name);
            write_trace(&path, trace).map_err(|source| BatchIoError::Trace { path, source })?;
        }
        shots.push(ShotRecord {
            shot: k,
            b_field: s.b_field,
            spin_phase: s.spin_phase,
            drift_phase: s.drift_phase,
            first,
            second,
        });
    }
    let manifest = BatchManifest {
        version: TRACE_FORMAT_VERSION,
        meta: batch.meta.clone(),
        shots,
    };
    write_atomic(
        &dir.join(MANIFEST_NAME),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(manifest)
}

pub fn load_batch(dir: &Path) -> Result<ShotBatch, BatchIoError> {
    let manifest: BatchManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_NAME))?)?;
    if manifest.version != TRACE_FORMAT_VERSION {
        return Err(BatchIoError::Version(manifest.version));
    }
    let read = |name: &PathBuf| {
        let path = dir.join(name);
        read_trace(&path).map_err(|source| BatchIoError::Trace { path, source })
    };
    let shots = manifest
        .shots
        .iter()
        .map(|r| {
            Ok(Shot {
                t: read(&r.first)?,
                r: read(&r.second)?,
                b_field: r.b_field,
                spin_phase: r.spin_phase,
                drift_phase: r.drift_phase,
            })
        })
        .collect::<Result<_, BatchIoError>>()?;
    Ok(ShotBatch {
        shots,
        meta: manifest.meta,
    })
}

/// Comma-separated table with `#` comment lines describing the columns.
pub fn write_table(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: &[Vec<f64>],
) -> std::io::Result<()> {
    use std::fmt::Write as _;
    let mut s = String::new();
    for c in comments {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}
