use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::sequencer::BatchMeta;
use crate::signal::{Trace, TRUNCATION_LEVEL};

/// Integration window `[start, end)` on the T record; the R record is read
/// over the same window delayed by `electronic_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub start: f64,
    pub end: f64,
    pub electronic_delay: f64,
}

impl WindowSpec {
    pub fn new(start: f64, end: f64, electronic_delay: f64) -> Result<Self, AnalysisError> {
        if !start.is_finite() || !end.is_finite() || !electronic_delay.is_finite() {
            return Err(AnalysisError::InvalidParameter(
                "window bounds must be finite".into(),
            ));
        }
        if !(end > start) {
            return Err(AnalysisError::InvalidParameter(format!(
                "window end {end:e} must exceed start {start:e}"
            )));
        }
        Ok(Self {
            start,
            end,
            electronic_delay,
        })
    }

    /// Window around the first pulse of a batch, wide enough for the pulse
    /// and the detector response, with the delay set to the storage time.
    pub fn for_batch(meta: &BatchMeta) -> Self {
        let seq = &meta.sequence;
        let (lo, hi) = seq
            .pulse
            .shifted(meta.layout.first_center)
            .extent(0.1 * TRUNCATION_LEVEL);
        let guard = meta.detector.kernel_extent();
        Self {
            start: lo - guard,
            end: hi + guard,
            electronic_delay: meta.storage_time,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Electronic delay rounded to whole samples.
    pub fn delay_samples(&self, sample_rate: f64) -> isize {
        (self.electronic_delay * sample_rate).round() as isize
    }

    /// `ΔT_e − round(ΔT_e·fs)/fs`; at most half a sample period.
    pub fn delay_residual(&self, sample_rate: f64) -> f64 {
        self.electronic_delay - self.delay_samples(sample_rate) as f64 / sample_rate
    }

    /// Indices of the samples of `trace` nearest `[start + offset, end + offset)`.
    pub fn sample_range(&self, trace: &Trace, offset: f64) -> Result<Range<usize>, AnalysisError> {
        let fs = trace.sample_rate();
        let i0 = ((self.start + offset - trace.t0()) * fs).round();
        let i1 = ((self.end + offset - trace.t0()) * fs).round();
        if i0 < 0.0 || i1 > trace.len() as f64 || i1 <= i0 {
            return Err(AnalysisError::Range(format!(
                "window [{:e}, {:e}) s outside {} record [{:e}, {:e}) s",
                self.start + offset,
                self.end + offset,
                trace.meta().label,
                trace.t0(),
                trace.grid().end()
            )));
        }
        Ok(i0 as usize..i1 as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{TraceLabel, TraceMeta};

    #[test]
    fn delay_residual_is_below_half_sample() {
        let w = WindowSpec::new(0.0, 1e-6, 5.004e-6).unwrap();
        assert_eq!(w.delay_samples(100e6), 500);
        assert!(w.delay_residual(100e6).abs() <= 0.5 / 100e6);
    }

    #[test]
    fn range_checks_record_bounds() {
        let t = Trace::new(
            0.0,
            100e6,
            vec![0.0; 1000],
            TraceMeta {
                shot: 0,
                label: TraceLabel::T,
            },
        );
        let w = WindowSpec::new(1e-6, 2e-6, 5e-6).unwrap();
        assert_eq!(w.sample_range(&t, 0.0).unwrap(), 100..200);
        assert!(w.sample_range(&t, 9e-6).is_err());
        assert!(WindowSpec::new(2.0, 1.0, 0.0).is_err());
    }
}
