//! Block-static multipath channels with additive white Gaussian noise.
//!
//! A scenario fixes the channel statistics (tap count, delay spread, SNR);
//! each transmitter-receiver link in it draws one tap realisation. Changing
//! the day only reseeds the draw, changing the location changes the
//! statistics.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lora::LoRaConfig;
use crate::seed;
use crate::signal::{active_power, ComplexSampleBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Room,
    Office,
    Outdoor,
}

impl Location {
    pub const ALL: [Location; 3] = [Location::Room, Location::Office, Location::Outdoor];

    pub fn as_str(self) -> &'static str {
        match self {
            Location::Room => "room",
            Location::Office => "office",
            Location::Outdoor => "outdoor",
        }
    }

    /// Default channel statistics for the location.
    pub fn preset(self) -> ChannelPreset {
        match self {
            Location::Room => ChannelPreset {
                num_taps: 3,
                delay_spread_s: 100e-9,
                snr_db: 25.0,
            },
            Location::Office => ChannelPreset {
                num_taps: 5,
                delay_spread_s: 300e-9,
                snr_db: 20.0,
            },
            Location::Outdoor => ChannelPreset {
                num_taps: 2,
                delay_spread_s: 50e-9,
                snr_db: 15.0,
            },
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Location {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "room" => Ok(Location::Room),
            "office" => Ok(Location::Office),
            "outdoor" => Ok(Location::Outdoor),
            other => Err(Error::InvalidConfig(format!("unknown location {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPreset {
    pub num_taps: usize,
    pub delay_spread_s: f64,
    pub snr_db: f64,
}

/// Spreading factor of the four LoRa protocol configurations.
pub fn config_spreading_factor(config_id: u8) -> Result<u8> {
    match config_id {
        1 => Ok(7),
        2 => Ok(8),
        3 => Ok(11),
        4 => Ok(12),
        other => Err(Error::InvalidConfig(format!("config_id {other} outside 1..=4"))),
    }
}

/// One capture context: when, where, with which settings and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: String,
    pub day: u32,
    pub location: Location,
    pub config_id: u8,
    pub receiver_id: u32,
    pub snr_db: f64,
    pub delay_spread_s: f64,
    pub num_taps: usize,
    pub rng_seed: u64,
}

impl ScenarioSpec {
    /// A scenario using the location's preset statistics.
    ///
    /// The seed depends on day and location only, so scenarios that differ
    /// solely in configuration or receiver see the same channel draws.
    pub fn preset(
        scenario_id: impl Into<String>,
        day: u32,
        location: Location,
        config_id: u8,
        receiver_id: u32,
        plan_seed: u64,
    ) -> Self {
        let p = location.preset();
        let rng_seed = seed::derive_str(seed::derive(plan_seed, day as u64), location.as_str());
        Self {
            scenario_id: scenario_id.into(),
            day,
            location,
            config_id,
            receiver_id,
            snr_db: p.snr_db,
            delay_spread_s: p.delay_spread_s,
            num_taps: p.num_taps,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "scenario {}: snr_db must be finite",
                self.scenario_id
            )));
        }
        if self.num_taps == 0 || !(self.delay_spread_s >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scenario {}: need num_taps >= 1 and delay_spread_s >= 0",
                self.scenario_id
            )));
        }
        config_spreading_factor(self.config_id)?;
        Ok(())
    }

    pub fn lora_config(&self) -> LoRaConfig {
        LoRaConfig::with_sf(config_spreading_factor(self.config_id).unwrap_or(7))
    }

    /// Axis coordinates; unique per scenario within a plan.
    pub fn axis_key(&self) -> (u32, Location, u8, u32) {
        (self.day, self.location, self.config_id, self.receiver_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    pub gain: Complex64,
}

/// Half-length of the windowed-sinc kernel of a fractional delay.
pub const FRACTIONAL_HALF_LEN: usize = 16;
const FRACTIONAL_BETA: f64 = 8.0;

/// Taps of one link plus the SNR at which noise is added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub taps: Vec<Tap>,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
}

impl ChannelRealization {
    pub fn identity() -> Self {
        Self {
            taps: vec![Tap {
                delay_s: 0.0,
                gain: Complex64::new(1.0, 0.0),
            }],
            snr_db: f64::INFINITY,
        }
    }

    pub fn tap_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    /// Frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        self.taps
            .iter()
            .map(|t| t.gain * Complex64::cis(-2.0 * std::f64::consts::PI * freq_hz * t.delay_s))
            .sum()
    }

    /// Discrete impulse response at sample rate `fs`: the first index it
    /// covers (possibly negative) and the coefficients from there.
    ///
    /// Whole-sample delays are single coefficients; fractional ones are
    /// Kaiser-windowed sincs of half-length [`FRACTIONAL_HALF_LEN`].
    pub fn impulse_response(&self, fs: f64) -> (isize, Vec<Complex64>) {
        let mut parts: Vec<(isize, Complex64)> = Vec::new();
        let i0 = crate::dsp::bessel_i0(FRACTIONAL_BETA);
        for t in &self.taps {
            let d = t.delay_s * fs;
            let whole = d.round();
            if (d - whole).abs() < 1e-9 {
                parts.push((whole as isize, t.gain));
                continue;
            }
            let l = FRACTIONAL_HALF_LEN as isize;
            let base = d.floor() as isize;
            for n in base - l + 1..=base + l {
                let x = n as f64 - d;
                let sinc = (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x);
                let r = x / l as f64;
                let w = crate::dsp::bessel_i0(FRACTIONAL_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0;
                parts.push((n, t.gain * (sinc * w)));
            }
        }
        let lo = parts.iter().map(|p| p.0).min().unwrap_or(0);
        let hi = parts.iter().map(|p| p.0).max().unwrap_or(0);
        let mut h = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (n, g) in parts {
            h[(n - lo) as usize] += g;
        }
        (lo, h)
    }
}

fn complex_normal(rng: &mut impl rand::Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw the channel of one link.
///
/// Tap `k` sits at a delay of `k * delay_spread` with mean power `exp(-k)`,
/// an exponential power-delay profile with decay constant `delay_spread`.
/// Gains are complex Gaussian and the set is normalised to unit total
/// power. With zero spread every tap lands at delay 0 and the link is flat.
pub fn realize_channel(spec: &ScenarioSpec, link_seed: u64) -> Result<ChannelRealization> {
    spec.validate()?;
    let mut rng = seed::rng(seed::derive(spec.rng_seed, link_seed));
    let mut taps: Vec<Tap> = (0..spec.num_taps)
        .map(|k| Tap {
            delay_s: k as f64 * spec.delay_spread_s,
            gain: complex_normal(&mut rng) * (-(k as f64) / 2.0).exp(),
        })
        .collect();
    let norm = taps.iter().map(|t| t.gain.norm_sqr()).sum::<f64>().sqrt();
    for t in &mut taps {
        t.gain /= norm;
    }
    Ok(ChannelRealization {
        taps,
        snr_db: spec.snr_db,
    })
}

/// Filter with the taps (output aligned with and trimmed to the input),
/// then add complex white noise at the realisation's SNR relative to the
/// active signal power.
pub fn apply_channel(
    buffer: &ComplexSampleBuffer,
    ch: &ChannelRealization,
    noise_seed: u64,
) -> Result<ComplexSampleBuffer> {
    let (lo, h) = ch.impulse_response(buffer.sample_rate_hz);
    if buffer.len() <= h.len() {
        return Err(Error::BufferTooShort {
            len: buffer.len(),
            needed: h.len(),
        });
    }
    let n = buffer.len() as isize;
    let mut out = vec![Complex64::new(0.0, 0.0); buffer.len()];
    for (j, g) in h.iter().enumerate() {
        if g.norm_sqr() == 0.0 {
            continue;
        }
        let d = lo + j as isize;
        let (start, end) = (d.max(0), (n + d).min(n));
        for i in start..end {
            out[i as usize] += buffer.samples[(i - d) as usize] * g;
        }
    }
    if ch.snr_db.is_finite() {
        let signal = active_power(&out);
        let noise_power = signal / 10f64.powf(ch.snr_db / 10.0);
        let scale = noise_power.sqrt();
        let mut rng = seed::rng(noise_seed);
        for o in &mut out {
            *o += complex_normal(&mut rng) * scale;
        }
    }
    Ok(buffer.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FS: f64 = 1e6;

    fn spec(location: Location) -> ScenarioSpec {
        ScenarioSpec::preset("s", 1, location, 1, 1, 77)
    }

    fn tone(freq: f64, n: usize) -> ComplexSampleBuffer {
        let s = (0..n).map(|i| Complex64::cis(2.0 * PI * freq * i as f64 / FS)).collect();
        ComplexSampleBuffer::new(s, FS).unwrap()
    }

    #[test]
    fn single_tap_channel_is_scalar() {
        let mut s = spec(Location::Room);
        s.num_taps = 1;
        s.delay_spread_s = 0.0;
        let ch = realize_channel(&s, 3).unwrap();
        assert_eq!(ch.taps.len(), 1);
        assert!((ch.taps[0].gain.norm() - 1.0).abs() < 1e-12);
        let noiseless = ChannelRealization {
            snr_db: f64::INFINITY,
            ..ch.clone()
        };
        let b = tone(1234.0, 1000);
        let out = apply_channel(&b, &noiseless, 0).unwrap();
        for (o, i) in out.samples.iter().zip(&b.samples) {
            assert!((o - i * ch.taps[0].gain).norm() < 1e-15);
        }
    }

    #[test]
    fn realization_is_deterministic_and_normalised() {
        for loc in Location::ALL {
            for link in 0..20 {
                let a = realize_channel(&spec(loc), link).unwrap();
                assert_eq!(a, realize_channel(&spec(loc), link).unwrap());
                assert!((a.tap_power() - 1.0).abs() < 1e-12);
                assert_eq!(a.taps[0].delay_s, 0.0);
            }
        }
        assert_ne!(
            realize_channel(&spec(Location::Room), 0).unwrap(),
            realize_channel(&spec(Location::Room), 1).unwrap()
        );
    }

    #[test]
    fn identity_channel_without_noise() {
        let b = tone(5000.0, 4096);
        assert_eq!(apply_channel(&b, &ChannelRealization::identity(), 1).unwrap(), b);
    }

    #[test]
    fn snr_calibration() {
        let b = tone(10_000.0, 200_000);
        for snr in [0.0, 10.0, 25.0] {
            let ch = ChannelRealization {
                snr_db: snr,
                ..ChannelRealization::identity()
            };
            let out = apply_channel(&b, &ch, 9).unwrap();
            let noise: f64 = out
                .samples
                .iter()
                .zip(&b.samples)
                .map(|(o, i)| (o - i).norm_sqr())
                .sum::<f64>()
                / b.len() as f64;
            let measured = 10.0 * (b.mean_power() / noise).log10();
            assert!((measured - snr).abs() < 0.2, "{snr}: {measured}");
        }
    }

    #[test]
    fn two_tap_response_matches_closed_form() {
        let ch = ChannelRealization {
            taps: vec![
                Tap { delay_s: 0.0, gain: Complex64::new(0.8, 0.0) },
                Tap { delay_s: 3e-6, gain: Complex64::new(0.0, 0.6) },
            ],
            snr_db: f64::INFINITY,
        };
        for f in [0.0, 40_000.0, 90_000.0, 160_000.0] {
            let out = apply_channel(&tone(f, 10_000), &ch, 0).unwrap();
            let measured = out.samples[100..].iter().map(|s| s.norm()).sum::<f64>() / 9900.0;
            let w = 2.0 * PI * f * 3.0 / FS;
            let analytic = (Complex64::new(0.8, 0.0) + Complex64::new(0.0, 0.6) * Complex64::cis(-w)).norm();
            assert!((measured - analytic).abs() / analytic < 0.01, "{f}: {measured} vs {analytic}");
            assert!((ch.response(f).norm() - analytic).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_delay_tracks_response_in_band() {
        let ch = ChannelRealization {
            taps: vec![
                Tap { delay_s: 0.0, gain: Complex64::new(0.7, 0.1) },
                Tap { delay_s: 130e-9, gain: Complex64::new(-0.3, 0.5) },
                Tap { delay_s: 2.4e-6, gain: Complex64::new(0.2, -0.2) },
            ],
            snr_db: f64::INFINITY,
        };
        for f in [-60_000.0, -5_000.0, 0.0, 30_000.0, 62_500.0, 200_000.0] {
            let x = tone(f, 4000);
            let out = apply_channel(&x, &ch, 0).unwrap();
            let h = ch.response(f);
            for i in 100..3900 {
                assert!((out.samples[i] - x.samples[i] * h).norm() < 2e-3, "{f} @ {i}");
            }
        }
    }

    #[test]
    fn short_buffer_rejected() {
        let ch = realize_channel(&spec(Location::Office), 0).unwrap();
        assert!(matches!(
            apply_channel(&tone(0.0, 3), &ch, 0),
            Err(Error::BufferTooShort { .. })
        ));
    }

    #[test]
    fn days_share_statistics_locations_do_not() {
        let d1 = ScenarioSpec::preset("a", 1, Location::Room, 1, 1, 5);
        let d2 = ScenarioSpec::preset("b", 2, Location::Room, 1, 1, 5);
        assert_eq!(
            (d1.num_taps, d1.delay_spread_s, d1.snr_db),
            (d2.num_taps, d2.delay_spread_s, d2.snr_db)
        );
        assert_ne!(d1.rng_seed, d2.rng_seed);
        for (a, b) in [(Location::Room, Location::Office), (Location::Room, Location::Outdoor), (Location::Office, Location::Outdoor)] {
            let (pa, pb) = (a.preset(), b.preset());
            assert!(pa.delay_spread_s != pb.delay_spread_s || pa.snr_db != pb.snr_db);
        }
        // Configuration and receiver changes keep the channel draw.
        let c4 = ScenarioSpec::preset("c", 1, Location::Room, 4, 2, 5);
        assert_eq!(d1.rng_seed, c4.rng_seed);
    }
}
