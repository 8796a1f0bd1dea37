//! From received sample streams to classifier frames.
//!
//! Two capture modes share one sample rate: `InBandPlusOob` keeps the whole
//! capture span, `InBandOnly` low-pass filters it to the LoRa channel
//! without decimating, so both modes feed identically shaped frames to the
//! classifier. Frames are non-overlapping windows in time-domain IQ or DFT
//! form, RMS-normalised per frame.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Psd};
use crate::error::{Error, Result};
use crate::signal::ComplexSampleBuffer;

/// Stopband attenuation of the in-band filter.
pub const IN_BAND_ATTENUATION_DB: f64 = 70.0;
/// Transition width of the in-band filter as a fraction of the cutoff,
/// centred on the cutoff.
pub const IN_BAND_TRANSITION_FRACTION: f64 = 0.12;
/// Windows below this fraction of the median window energy are silence.
pub const GAP_ENERGY_FRACTION: f64 = 0.1;
/// Welch segment length used for spectral measurements.
pub const WELCH_SEGMENT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    InBandOnly,
    #[default]
    InBandPlusOob,
}

impl BandMode {
    pub const ALL: [BandMode; 2] = [BandMode::InBandOnly, BandMode::InBandPlusOob];

    pub fn as_str(self) -> &'static str {
        match self {
            BandMode::InBandOnly => "in_band_only",
            BandMode::InBandPlusOob => "in_band_plus_oob",
        }
    }
}

impl fmt::Display for BandMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_band_only" => Ok(BandMode::InBandOnly),
            "in_band_plus_oob" => Ok(BandMode::InBandPlusOob),
            other => Err(Error::InvalidConfig(format!("unknown band mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Representation {
    #[serde(rename = "iq", alias = "IQ")]
    Iq,
    #[default]
    #[serde(rename = "fft", alias = "FFT")]
    Fft,
}

impl Representation {
    pub const ALL: [Representation; 2] = [Representation::Iq, Representation::Fft];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Iq => "iq",
            Representation::Fft => "fft",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iq" => Ok(Representation::Iq),
            "fft" => Ok(Representation::Fft),
            other => Err(Error::InvalidConfig(format!("unknown representation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PerFrameRms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureConfig {
    pub sample_rate_hz: f64,
    pub capture_bandwidth_hz: f64,
    pub window_len: usize,
    pub stride: usize,
    pub band_mode: BandMode,
    pub representation: Representation,
    pub normalization: Normalization,
    /// Nominal LoRa channel width used for band selection.
    pub signal_bandwidth_hz: f64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1e6,
            capture_bandwidth_hz: 1e6,
            window_len: 8192,
            stride: 8192,
            band_mode: BandMode::InBandPlusOob,
            representation: Representation::Fft,
            normalization: Normalization::PerFrameRms,
            signal_bandwidth_hz: 125e3,
        }
    }
}

impl CaptureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || !self.window_len.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "need stride >= 1 and power-of-two window, got stride {} window {}",
                self.stride, self.window_len
            )));
        }
        if self.capture_bandwidth_hz > self.sample_rate_hz {
            return Err(Error::InvalidConfig(
                "capture bandwidth exceeds sample rate".into(),
            ));
        }
        Ok(())
    }
}

/// Provenance of a frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameSource {
    pub scenario_id: String,
    pub transmission: u32,
    pub window: u32,
}

/// A `2 x window_len` real frame, rows stored back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub data: Vec<f64>,
    pub width: usize,
    pub label: u32,
    pub source: FrameSource,
    pub representation: Representation,
}

impl Frame {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Frame {
        Frame {
            data: self.data.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }
}

/// The in-band low-pass taps for a channel width at a sample rate.
pub fn in_band_filter(signal_bw_hz: f64, sample_rate_hz: f64) -> Result<Vec<f64>> {
    let cutoff_hz = signal_bw_hz / 2.0;
    if !(cutoff_hz < sample_rate_hz / 2.0) {
        return Err(Error::CutoffAboveNyquist {
            cutoff_hz,
            sample_rate_hz,
        });
    }
    let cutoff = cutoff_hz / sample_rate_hz;
    let transition = IN_BAND_TRANSITION_FRACTION * cutoff;
    Ok(dsp::kaiser_lowpass(cutoff, transition, IN_BAND_ATTENUATION_DB))
}

/// Keep the full capture span, or filter it down to the signal channel.
pub fn band_select(
    buffer: &ComplexSampleBuffer,
    mode: BandMode,
    signal_bw_hz: f64,
) -> Result<ComplexSampleBuffer> {
    if !(signal_bw_hz < buffer.sample_rate_hz) {
        return Err(Error::CutoffAboveNyquist {
            cutoff_hz: signal_bw_hz / 2.0,
            sample_rate_hz: buffer.sample_rate_hz,
        });
    }
    match mode {
        BandMode::InBandPlusOob => Ok(buffer.clone()),
        BandMode::InBandOnly => {
            let taps = in_band_filter(signal_bw_hz, buffer.sample_rate_hz)?;
            let delay = (taps.len() - 1) / 2;
            let full = dsp::fft_convolve(&buffer.samples, &taps);
            Ok(buffer.with_samples(full[delay..delay + buffer.len()].to_vec()))
        }
    }
}

fn normalize(data: &mut [f64]) {
    let ss: f64 = data.iter().map(|v| v * v).sum();
    if ss > 0.0 {
        let k = (data.len() as f64 / ss).sqrt();
        for v in data {
            *v *= k;
        }
    }
}

/// Rows of real and imaginary parts, no normalisation.
pub fn iq_rows(window: &[Complex64]) -> Vec<f64> {
    let mut data = Vec::with_capacity(2 * window.len());
    data.extend(window.iter().map(|c| c.re));
    data.extend(window.iter().map(|c| c.im));
    data
}

/// Unnormalised DFT, natural bin order (DC first), no taper.
pub fn dft(window: &[Complex64]) -> Vec<Complex64> {
    let mut buf = window.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn frame(data: Vec<f64>, width: usize, representation: Representation, label: u32, source: FrameSource) -> Frame {
    Frame {
        data,
        width,
        label,
        source,
        representation,
    }
}

pub fn to_iq_frame(window: &[Complex64], label: u32, source: FrameSource) -> Frame {
    let mut data = iq_rows(window);
    normalize(&mut data);
    frame(data, window.len(), Representation::Iq, label, source)
}

pub fn to_fft_frame(window: &[Complex64], label: u32, source: FrameSource) -> Frame {
    let mut data = iq_rows(&dft(window));
    normalize(&mut data);
    frame(data, window.len(), Representation::Fft, label, source)
}

/// Offsets of windows that carry signal.
///
/// A window is kept when its energy reaches [`GAP_ENERGY_FRACTION`] of the
/// median window energy of the buffer (and is nonzero).
pub fn active_windows(buffer: &ComplexSampleBuffer, window_len: usize, stride: usize) -> Vec<usize> {
    if buffer.len() < window_len {
        return Vec::new();
    }
    let starts: Vec<usize> = (0..=buffer.len() - window_len).step_by(stride).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| buffer.samples[s..s + window_len].iter().map(|c| c.norm_sqr()).sum())
        .collect();
    let mut sorted = energies.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let floor = GAP_ENERGY_FRACTION * median;
    starts
        .into_iter()
        .zip(energies)
        .filter(|&(_, e)| e > 0.0 && e >= floor)
        .map(|(s, _)| s)
        .collect()
}

/// Cut a buffer into labelled frames.
pub fn slice_frames(
    buffer: &ComplexSampleBuffer,
    config: &CaptureConfig,
    label: u32,
    scenario_id: &str,
    transmission: u32,
) -> Vec<Frame> {
    if buffer.len() < config.window_len {
        log::warn!(
            "buffer of {} samples is shorter than one {}-sample window; no frames",
            buffer.len(),
            config.window_len
        );
        return Vec::new();
    }
    let starts = active_windows(buffer, config.window_len, config.stride);
    frames_at(buffer, config, &starts, label, scenario_id, transmission)
}

/// Frames at the given window offsets, which must fit inside the buffer.
///
/// Lets several filtered versions of one recording share the window choice
/// made on the raw capture.
pub fn frames_at(
    buffer: &ComplexSampleBuffer,
    config: &CaptureConfig,
    starts: &[usize],
    label: u32,
    scenario_id: &str,
    transmission: u32,
) -> Vec<Frame> {
    let w = config.window_len;
    starts
        .iter()
        .map(|&start| {
            let window = &buffer.samples[start..start + w];
            let source = FrameSource {
                scenario_id: scenario_id.to_string(),
                transmission,
                window: (start / config.stride) as u32,
            };
            match config.representation {
                Representation::Iq => to_iq_frame(window, label, source),
                Representation::Fft => to_fft_frame(window, label, source),
            }
        })
        .collect()
}

/// Peak-normalised spectrum for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub power_db: Vec<f64>,
}

impl Spectrum {
    pub fn from_psd(psd: &Psd) -> Self {
        let peak = psd.power.iter().cloned().fold(0.0, f64::max);
        let floor = peak * 1e-30;
        Spectrum {
            freqs_hz: psd.freqs_hz.clone(),
            power_db: psd
                .power
                .iter()
                .map(|&p| 10.0 * (p.max(floor) / peak).log10())
                .collect(),
        }
    }

    /// Level at the bin nearest `freq_hz`.
    pub fn at(&self, freq_hz: f64) -> f64 {
        let i = self
            .freqs_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq_hz).abs().total_cmp(&(b.1 - freq_hz).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.power_db[i]
    }

    /// Two-column CSV: `frequency_hz,normalized_power_db`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("frequency_hz,normalized_power_db\n");
        for (f, p) in self.freqs_hz.iter().zip(&self.power_db) {
            out.push_str(&format!("{f},{p}\n"));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OobMeasurement {
    /// `10 log10(P_out / P_in)`.
    pub ratio_db: f64,
    pub spectrum: Spectrum,
}

/// Out-of-band to in-band power ratio from a Welch periodogram.
pub fn measure_oob_power(buffer: &ComplexSampleBuffer, signal_bw_hz: f64) -> Result<OobMeasurement> {
    if buffer.len() < WELCH_SEGMENT {
        return Err(Error::BufferTooShort {
            len: buffer.len(),
            needed: WELCH_SEGMENT - 1,
        });
    }
    if buffer.samples.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(Error::DegenerateBuffer);
    }
    let psd = dsp::welch(&buffer.samples, buffer.sample_rate_hz, WELCH_SEGMENT);
    let (inb, oob) = psd.split(signal_bw_hz / 2.0);
    Ok(OobMeasurement {
        ratio_db: 10.0 * (oob / inb).log10(),
        spectrum: Spectrum::from_psd(&psd),
    })
}
