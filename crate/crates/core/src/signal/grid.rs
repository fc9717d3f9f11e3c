use serde::{Deserialize, Serialize};

/// Uniform sampling grid `t_i = t0 + i / sample_rate`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub sample_rate: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, sample_rate: f64, len: usize) -> Self {
        Self {
            t0,
            sample_rate,
            len,
        }
    }

    /// Grid covering `duration` seconds; the sample count is
    /// `round(duration · sample_rate)`.
    pub fn from_window(t0: f64, duration: f64, sample_rate: f64) -> Self {
        let len = (duration * sample_rate).round().max(0.0) as usize;
        Self::new(t0, sample_rate, len)
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }

    pub fn duration(&self) -> f64 {
        self.len as f64 / self.sample_rate
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.duration()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.sample_rate
    }
}
