//! Ideal LoRa chirp-spread-spectrum waveforms.
//!
//! Symbols are cyclic shifts of a linear up-chirp sweeping the full channel
//! bandwidth. A transmission is a run of packets (preamble of base chirps
//! followed by payload chirps) separated by silent guard gaps. No sync word,
//! header or coding is modelled: the fingerprinting pipeline only ever looks
//! at raw windows of the waveform.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::signal::ComplexSampleBuffer;

/// Silence between packet repetitions.
pub const GUARD_GAP_S: f64 = 0.010;

/// LoRa coding rate `4/(4+k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CodingRate {
    #[default]
    Cr45,
    Cr46,
    Cr47,
    Cr48,
}

impl CodingRate {
    pub fn denominator(self) -> u32 {
        match self {
            CodingRate::Cr45 => 5,
            CodingRate::Cr46 => 6,
            CodingRate::Cr47 => 7,
            CodingRate::Cr48 => 8,
        }
    }

    pub fn fraction(self) -> f64 {
        4.0 / self.denominator() as f64
    }
}

impl fmt::Display for CodingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "4/{}", self.denominator())
    }
}

impl FromStr for CodingRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "4/5" => Ok(CodingRate::Cr45),
            "4/6" => Ok(CodingRate::Cr46),
            "4/7" => Ok(CodingRate::Cr47),
            "4/8" => Ok(CodingRate::Cr48),
            other => Err(Error::InvalidConfig(format!("unknown coding rate {other:?}"))),
        }
    }
}

impl Serialize for CodingRate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodingRate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Physical-layer parameters of a LoRa link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoRaConfig {
    pub spreading_factor: u8,
    pub bandwidth_hz: f64,
    pub preamble_symbols: u32,
    pub coding_rate: CodingRate,
    /// Metadata only.
    pub tx_power_dbm: f64,
}

impl Default for LoRaConfig {
    fn default() -> Self {
        Self {
            spreading_factor: 7,
            bandwidth_hz: 125_000.0,
            preamble_symbols: 8,
            coding_rate: CodingRate::Cr45,
            tx_power_dbm: 20.0,
        }
    }
}

impl LoRaConfig {
    pub fn with_sf(spreading_factor: u8) -> Self {
        Self {
            spreading_factor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(7..=12).contains(&self.spreading_factor) {
            return Err(Error::InvalidConfig(format!(
                "spreading factor {} outside 7..=12",
                self.spreading_factor
            )));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        Ok(())
    }

    /// Number of chip positions per symbol, `2^SF`.
    pub fn chips(&self) -> u32 {
        1 << self.spreading_factor
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.chips() as f64 / self.bandwidth_hz
    }

    /// Samples per symbol at `sample_rate_hz`.
    pub fn samples_per_symbol(&self, sample_rate_hz: f64) -> usize {
        (self.symbol_duration_s() * sample_rate_hz).round() as usize
    }
}

/// Raw LoRa bit rate `SF * BW / 2^SF * CR` in bits per second.
pub fn bit_rate(config: &LoRaConfig) -> f64 {
    config.spreading_factor as f64 * config.bandwidth_hz / config.chips() as f64
        * config.coding_rate.fraction()
}

/// Payload symbols for a transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolStream {
    pub symbols: Vec<u32>,
    pub rng_seed: u64,
}

impl SymbolStream {
    /// `len` uniformly random symbols drawn from `rng_seed`.
    pub fn random(spreading_factor: u8, len: usize, rng_seed: u64) -> Self {
        let mut rng = seed::rng(rng_seed);
        let m = 1u32 << spreading_factor;
        let symbols = (0..len).map(|_| rng.random_range(0..m)).collect();
        Self { symbols, rng_seed }
    }

    pub fn validate(&self, spreading_factor: u8) -> Result<()> {
        let m = 1u32 << spreading_factor;
        match self.symbols.iter().find(|&&s| s >= m) {
            Some(&symbol) => Err(Error::SymbolOutOfRange {
                symbol,
                sf: spreading_factor,
            }),
            None => Ok(()),
        }
    }
}

/// Phase of the chirp for `symbol` at time `t` seconds into the symbol.
///
/// Instantaneous frequency starts at `-BW/2 + symbol*BW/2^SF`, rises at
/// `BW^2/2^SF` Hz/s and wraps by `-BW` once it reaches `+BW/2`. Phase is
/// continuous across the wrap and zero at `t = 0`.
fn chirp_phase(config: &LoRaConfig, symbol: u32, t: f64) -> f64 {
    let bw = config.bandwidth_hz;
    let m = config.chips() as f64;
    let slope = bw * bw / m;
    let f0 = -bw / 2.0 + symbol as f64 * bw / m;
    let t_wrap = (m - symbol as f64) / bw;
    let base = f0 * t + 0.5 * slope * t * t;
    if t < t_wrap {
        2.0 * PI * base
    } else {
        // Frequency drops by BW at t_wrap; continuity fixes the constant.
        2.0 * PI * (base - bw * (t - t_wrap))
    }
}

fn check_rate(config: &LoRaConfig, sample_rate_hz: f64) -> Result<()> {
    if !(sample_rate_hz >= config.bandwidth_hz) {
        return Err(Error::SampleRateTooLow {
            sample_rate_hz,
            bandwidth_hz: config.bandwidth_hz,
        });
    }
    Ok(())
}

fn chirp_samples(config: &LoRaConfig, symbol: u32, sample_rate_hz: f64) -> Vec<Complex64> {
    let n = config.samples_per_symbol(sample_rate_hz);
    (0..n)
        .map(|i| Complex64::from_polar(1.0, chirp_phase(config, symbol, i as f64 / sample_rate_hz)))
        .collect()
}

/// One symbol of the cyclically shifted up-chirp.
pub fn synthesize_chirp(
    config: &LoRaConfig,
    symbol: u32,
    sample_rate_hz: f64,
) -> Result<ComplexSampleBuffer> {
    config.validate()?;
    if symbol >= config.chips() {
        return Err(Error::SymbolOutOfRange {
            symbol,
            sf: config.spreading_factor,
        });
    }
    check_rate(config, sample_rate_hz)?;
    ComplexSampleBuffer::new(chirp_samples(config, symbol, sample_rate_hz), sample_rate_hz)
}

/// A transmission of exactly `duration_s * sample_rate_hz` samples.
///
/// Packets (preamble, then payload) repeat back to back with
/// [`GUARD_GAP_S`] of silence between them; the last packet is cut wherever
/// the duration ends.
pub fn synthesize_transmission(
    config: &LoRaConfig,
    payload: &SymbolStream,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<ComplexSampleBuffer> {
    config.validate()?;
    check_rate(config, sample_rate_hz)?;
    payload.validate(config.spreading_factor)?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if payload.symbols.is_empty() && config.preamble_symbols == 0 {
        return Err(Error::EmptyTransmission);
    }

    let total = (duration_s * sample_rate_hz).round() as usize;
    let base = chirp_samples(config, 0, sample_rate_hz);
    let mut packet = Vec::new();
    for _ in 0..config.preamble_symbols {
        packet.extend_from_slice(&base);
    }
    let mut cache: std::collections::HashMap<u32, Vec<Complex64>> = Default::default();
    for &s in &payload.symbols {
        let chirp = cache
            .entry(s)
            .or_insert_with(|| chirp_samples(config, s, sample_rate_hz));
        packet.extend_from_slice(chirp);
    }
    let gap = (GUARD_GAP_S * sample_rate_hz).round() as usize;

    let mut samples = Vec::with_capacity(total + packet.len());
    while samples.len() < total {
        samples.extend_from_slice(&packet);
        samples.resize(samples.len() + gap, Complex64::new(0.0, 0.0));
    }
    samples.truncate(total);
    ComplexSampleBuffer::new(samples, sample_rate_hz)
}
