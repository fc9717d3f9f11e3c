use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceLabel {
    #[serde(rename = "T")]
    T,
    #[serde(rename = "R")]
    R,
    #[serde(rename = "r1")]
    R1,
    #[serde(rename = "r2")]
    R2,
    #[serde(rename = "combined")]
    Combined,
}

impl TraceLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceLabel::T => "T",
            TraceLabel::R => "R",
            TraceLabel::R1 => "r1",
            TraceLabel::R2 => "r2",
            TraceLabel::Combined => "combined",
        }
    }
}

impl fmt::Display for TraceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(TraceLabel::T),
            "R" => Ok(TraceLabel::R),
            "r1" => Ok(TraceLabel::R1),
            "r2" => Ok(TraceLabel::R2),
            "combined" => Ok(TraceLabel::Combined),
            other => Err(format!("unknown trace label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub shot: usize,
    pub label: TraceLabel,
}

/// Uniformly sampled photocurrent record. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    t0: f64,
    sample_rate: f64,
    samples: Vec<f64>,
    meta: TraceMeta,
}

impl Trace {
    pub fn new(t0: f64, sample_rate: f64, samples: Vec<f64>, meta: TraceMeta) -> Self {
        Self {
            t0,
            sample_rate,
            samples,
            meta,
        }
    }

    pub fn zeros(grid: &TimeGrid, meta: TraceMeta) -> Self {
        Self::new(grid.t0, grid.sample_rate, vec![0.0; grid.len], meta)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn meta(&self) -> TraceMeta {
        self.meta
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.t0, self.sample_rate, self.samples.len())
    }

    /// A new trace with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// `Σ x_i² · Δt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() * self.dt()
    }
}
