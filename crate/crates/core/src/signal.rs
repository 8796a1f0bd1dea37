//! Complex baseband sample buffers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default carrier of the simulated testbed.
pub const DEFAULT_CARRIER_HZ: f64 = 915e6;
/// Default capture rate of the simulated receivers.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1e6;

/// Complex baseband samples at a known sample rate.
///
/// `carrier_hz` is an annotation only; all processing happens at baseband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSampleBuffer {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
}

impl ComplexSampleBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            carrier_hz: DEFAULT_CARRIER_HZ,
        })
    }

    pub fn with_carrier(mut self, carrier_hz: f64) -> Self {
        self.carrier_hz = carrier_hz;
        self
    }

    /// A buffer holding `samples` with the same rate and carrier as `self`.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            carrier_hz: self.carrier_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power over all samples.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.energy() / self.samples.len() as f64
    }

    /// Mean power over samples that are not silence.
    ///
    /// A sample counts as silence when its power is below `1e-3` of the
    /// buffer's peak power, which excludes guard gaps (and any small DC
    /// offset riding on them).
    pub fn active_power(&self) -> f64 {
        active_power(&self.samples)
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptyBuffer)
        } else {
            Ok(())
        }
    }
}

pub(crate) fn active_power(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let floor = peak * 1e-3;
    let (sum, n) = samples
        .iter()
        .map(|s| s.norm_sqr())
        .filter(|&p| p >= floor)
        .fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
    sum / n as f64
}
