use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::write_atomic;
use crate::signal::{Trace, TraceLabel, TraceMeta};

pub const TRACE_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"ALHI";

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("refusing to write a trace with no samples")]
    Empty,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("trace format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch: header says {expected}, data hashes to {found}")]
    Checksum { expected: String, found: String },
}

fn digest(trace: &Trace) -> String {
    let mut h = Sha256::new();
    for v in trace.samples() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn check_writable(trace: &Trace) -> Result<(), TraceIoError> {
    if trace.is_empty() {
        Err(TraceIoError::Empty)
    } else {
        Ok(())
    }
}

/// CSV with a `#` metadata header and one `time_s,current_au` row per
/// sample. Values are printed in shortest round-trip form.
pub fn trace_to_csv(trace: &Trace) -> Result<String, TraceIoError> {
    use std::fmt::Write as _;
    check_writable(trace)?;
    let m = trace.meta();
    let mut s = String::with_capacity(trace.len() * 48 + 256);
    let _ = writeln!(s, "# atomlight trace");
    let _ = writeln!(s, "# version: {TRACE_FORMAT_VERSION}");
    let _ = writeln!(s, "# sample_rate_hz: {:e}", trace.sample_rate());
    let _ = writeln!(s, "# t0_s: {:e}", trace.t0());
    let _ = writeln!(s, "# shot: {}", m.shot);
    let _ = writeln!(s, "# label: {}", m.label);
    let _ = writeln!(s, "# samples: {}", trace.len());
    let _ = writeln!(s, "# sha256: {}", digest(trace));
    s.push_str("time_s,current_au\n");
    for (i, v) in trace.samples().iter().enumerate() {
        let _ = writeln!(s, "{:e},{:e}", trace.time(i), v);
    }
    Ok(s)
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &Trace) -> Result<(), TraceIoError> {
    let text = trace_to_csv(trace)?;
    write_atomic(path.as_ref(), text.as_bytes())?;
    Ok(())
}

fn format_err(line: usize, message: impl Into<String>) -> TraceIoError {
    TraceIoError::Format {
        line,
        message: message.into(),
    }
}

pub fn trace_from_csv(reader: impl Read) -> Result<Trace, TraceIoError> {
    let reader = BufReader::new(reader);
    let mut version = None;
    let (mut fs, mut t0, mut shot, mut label, mut count, mut sha) =
        (None, None, None, None, None, None);
    let mut samples = Vec::new();
    let mut header_done = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if !header_done {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    let v = v.trim();
                    let num = |v: &str| {
                        v.parse::<f64>()
                            .map_err(|_| format_err(n, format!("bad number `{v}`")))
                    };
                    match k.trim() {
                        "version" => {
                            version =
                                Some(v.parse::<u32>().map_err(|_| format_err(n, "bad version"))?)
                        }
                        "sample_rate_hz" => fs = Some(num(v)?),
                        "t0_s" => t0 = Some(num(v)?),
                        "shot" => {
                            shot = Some(v.parse::<usize>().map_err(|_| format_err(n, "bad shot"))?)
                        }
                        "label" => {
                            label = Some(v.parse::<TraceLabel>().map_err(|e| format_err(n, e))?)
                        }
                        "samples" => {
                            count =
                                Some(v.parse::<usize>().map_err(|_| format_err(n, "bad count"))?)
                        }
                        "sha256" => sha = Some(v.to_string()),
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim() != "time_s,current_au" {
                return Err(format_err(
                    n,
                    "expected the `time_s,current_au` column header",
                ));
            }
            let found = version.ok_or_else(|| format_err(n, "missing version"))?;
            if found != TRACE_FORMAT_VERSION {
                return Err(TraceIoError::Version {
                    found,
                    expected: TRACE_FORMAT_VERSION,
                });
            }
            header_done = true;
            if let Some(c) = count {
                samples.reserve(c);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| format_err(n, "expected two comma-separated columns"))?;
        samples.push(
            v.trim()
                .parse::<f64>()
                .map_err(|_| format_err(n, format!("bad current `{v}`")))?,
        );
    }
    if !header_done {
        return Err(format_err(0, "no column header found"));
    }
    let missing = |what: &str| format_err(0, format!("header lacks `{what}`"));
    let trace = Trace::new(
        t0.ok_or_else(|| missing("t0_s"))?,
        fs.ok_or_else(|| missing("sample_rate_hz"))?,
        samples,
        TraceMeta {
            shot: shot.ok_or_else(|| missing("shot"))?,
            label: label.ok_or_else(|| missing("label"))?,
        },
    );
    if let Some(c) = count {
        if c != trace.len() {
            return Err(format_err(
                0,
                format!("header says {c} samples, found {}", trace.len()),
            ));
        }
    }
    let expected = sha.ok_or_else(|| missing("sha256"))?;
    let found = digest(&trace);
    if expected != found {
        return Err(TraceIoError::Checksum { expected, found });
    }
    Ok(trace)
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Trace, TraceIoError> {
    trace_from_csv(fs::File::open(path)?)
}

fn label_code(l: TraceLabel) -> u8 {
    match l {
        TraceLabel::T => 0,
        TraceLabel::R => 1,
        TraceLabel::R1 => 2,
        TraceLabel::R2 => 3,
        TraceLabel::Combined => 4,
    }
}

/// Binary layout: `ALHI`, version (u32), shot (u64), label (u8), sample
/// rate and t0 (f64), count (u64), samples (f64), SHA-256 of the samples.
/// All little-endian.
pub fn trace_to_bytes(trace: &Trace) -> Result<Vec<u8>, TraceIoError> {
    check_writable(trace)?;
    let m = trace.meta();
    let mut b = Vec::with_capacity(8 * trace.len() + 80);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&TRACE_FORMAT_VERSION.to_le_bytes());
    b.extend_from_slice(&(m.shot as u64).to_le_bytes());
    b.push(label_code(m.label));
    b.extend_from_slice(&trace.sample_rate().to_le_bytes());
    b.extend_from_slice(&trace.t0().to_le_bytes());
    b.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    for v in trace.samples() {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&hex::decode(digest(trace)).expect("hex digest"));
    Ok(b)
}

pub fn trace_from_bytes(bytes: &[u8]) -> Result<Trace, TraceIoError> {
    let bad = |m: &str| format_err(0, m.to_string());
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8], TraceIoError> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad("truncated file"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad("missing ALHI magic bytes"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != TRACE_FORMAT_VERSION {
        return Err(TraceIoError::Version {
            found: version,
            expected: TRACE_FORMAT_VERSION,
        });
    }
    let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    let shot = u64_at(take(8)?) as usize;
    let label = match take(1)?[0] {
        0 => TraceLabel::T,
        1 => TraceLabel::R,
        2 => TraceLabel::R1,
        3 => TraceLabel::R2,
        4 => TraceLabel::Combined,
        _ => return Err(bad("unknown label code")),
    };
    let fs = f64_at(take(8)?);
    let t0 = f64_at(take(8)?);
    let n = u64_at(take(8)?) as usize;
    let data = take(
        n.checked_mul(8)
            .ok_or_else(|| bad("sample count overflows"))?,
    )?;
    let samples = data.chunks_exact(8).map(f64_at).collect();
    let expected = hex::encode(take(32)?);
    let trace = Trace::new(t0, fs, samples, TraceMeta { shot, label });
    let found = digest(&trace);
    if expected != found {
        return Err(TraceIoError::Checksum { expected, found });
    }
    Ok(trace)
}

pub fn write_trace_bin(path: impl AsRef<Path>, trace: &Trace) -> Result<(), TraceIoError> {
    write_atomic(path.as_ref(), &trace_to_bytes(trace)?)?;
    Ok(())
}

pub fn read_trace_bin(path: impl AsRef<Path>) -> Result<Trace, TraceIoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    trace_from_bytes(&bytes)
}

/// Dispatch on extension: `.bin` is binary, anything else CSV.
pub fn write_trace(path: impl AsRef<Path>, trace: &Trace) -> Result<(), TraceIoError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "bin") {
        write_trace_bin(path, trace)
    } else {
        write_trace_csv(path, trace)
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, TraceIoError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "bin") {
        read_trace_bin(path)
    } else {
        read_trace_csv(path)
    }
}
