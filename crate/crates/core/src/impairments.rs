//! Transmitter and receiver hardware impairments.
//!
//! Each unit carries its own phase noise, carrier offset, IQ imbalance and DC
//! offset. The chain applied to a buffer is always
//! IQ imbalance -> phase noise -> carrier offset -> DC offset (-> gain for
//! receivers), mirroring mixer imbalance at baseband ahead of LO errors at
//! upconversion.
//!
//! Phase-noise magnitude `m` is a dimensionless knob: the per-sample Wiener
//! increment has standard deviation `m * sqrt(B / fs)` radians, with `B` the
//! 125 kHz LoRa reference bandwidth, so the phase diffusion per second
//! (`m^2 * B`) does not depend on the capture rate.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::signal::ComplexSampleBuffer;

/// Bandwidth that anchors the phase-noise magnitude scale.
pub const REFERENCE_BANDWIDTH_HZ: f64 = 125_000.0;

/// Standard deviation of the per-sample phase increment for magnitude `m`.
pub fn sigma_per_sample(magnitude: f64, sample_rate_hz: f64) -> f64 {
    magnitude * (REFERENCE_BANDWIDTH_HZ / sample_rate_hz).sqrt()
}

/// Power-amplifier model. Only the linear amplifier is used by default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PaModel {
    #[default]
    Linear,
    /// Rapp AM/AM compression with saturation amplitude and smoothness `p`.
    Rapp { saturation: f64, smoothness: f64 },
}

impl PaModel {
    fn apply(&self, samples: &mut [Complex64]) {
        if let PaModel::Rapp {
            saturation,
            smoothness,
        } = *self
        {
            let p2 = 2.0 * smoothness;
            for s in samples.iter_mut() {
                let a = s.norm();
                if a > 0.0 {
                    let g = 1.0 / (1.0 + (a / saturation).powf(p2)).powf(1.0 / p2);
                    *s *= g;
                }
            }
        }
    }
}

/// Hardware impairments of one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: u32,
    pub phase_noise_magnitude: f64,
    pub cfo_hz: f64,
    pub iq_gain_imbalance_db: f64,
    pub iq_phase_imbalance_rad: f64,
    pub dc_offset: Complex64,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "is_linear")]
    pub pa: PaModel,
}

fn is_linear(pa: &PaModel) -> bool {
    *pa == PaModel::Linear
}

impl DeviceProfile {
    /// A device with no impairments at all.
    pub fn ideal(device_id: u32) -> Self {
        Self {
            device_id,
            phase_noise_magnitude: 0.0,
            cfo_hz: 0.0,
            iq_gain_imbalance_db: 0.0,
            iq_phase_imbalance_rad: 0.0,
            dc_offset: Complex64::new(0.0, 0.0),
            rng_seed: 0,
            pa: PaModel::Linear,
        }
    }

    /// Same hardware, independent phase-noise realisation.
    pub fn reseeded(&self, salt: u64) -> Self {
        Self {
            rng_seed: seed::derive(self.rng_seed, salt),
            ..self.clone()
        }
    }

    fn impairment_key(&self) -> [u64; 6] {
        [
            self.phase_noise_magnitude.to_bits(),
            self.cfo_hz.to_bits(),
            self.iq_gain_imbalance_db.to_bits(),
            self.iq_phase_imbalance_rad.to_bits(),
            self.dc_offset.re.to_bits(),
            self.dc_offset.im.to_bits(),
        ]
    }
}

/// Hardware impairments of one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverProfile {
    pub receiver_id: u32,
    pub phase_noise_magnitude: f64,
    #[serde(default)]
    pub cfo_hz: f64,
    pub gain_db: f64,
    pub iq_gain_imbalance_db: f64,
    pub iq_phase_imbalance_rad: f64,
    pub dc_offset: Complex64,
    pub rng_seed: u64,
}

impl ReceiverProfile {
    pub fn ideal(receiver_id: u32) -> Self {
        Self {
            receiver_id,
            phase_noise_magnitude: 0.0,
            cfo_hz: 0.0,
            gain_db: 0.0,
            iq_gain_imbalance_db: 0.0,
            iq_phase_imbalance_rad: 0.0,
            dc_offset: Complex64::new(0.0, 0.0),
            rng_seed: 0,
        }
    }

    pub fn reseeded(&self, salt: u64) -> Self {
        Self {
            rng_seed: seed::derive(self.rng_seed, salt),
            ..self.clone()
        }
    }
}

/// Wiener phase process. Single use: each buffer gets its own instance.
#[derive(Debug, Clone)]
pub struct PhaseNoiseProcess {
    sigma_per_sample: f64,
    state: f64,
    rng: ChaCha8Rng,
}

impl PhaseNoiseProcess {
    pub fn new(sigma_per_sample: f64, rng_seed: u64) -> Self {
        assert!(sigma_per_sample >= 0.0, "phase-noise sigma must be nonnegative");
        Self {
            sigma_per_sample,
            state: 0.0,
            rng: seed::rng(rng_seed),
        }
    }

    pub fn from_magnitude(magnitude: f64, sample_rate_hz: f64, rng_seed: u64) -> Self {
        Self::new(sigma_per_sample(magnitude, sample_rate_hz), rng_seed)
    }

    pub fn sigma_per_sample(&self) -> f64 {
        self.sigma_per_sample
    }

    /// Current phase, then advance by one increment.
    pub fn next_phase(&mut self) -> f64 {
        let out = self.state;
        if self.sigma_per_sample > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.state += self.sigma_per_sample * z;
        }
        out
    }
}

/// `s[n] * exp(j theta[n])` with `theta` drawn from `process`.
pub fn apply_phase_noise(
    buffer: &ComplexSampleBuffer,
    mut process: PhaseNoiseProcess,
) -> Result<ComplexSampleBuffer> {
    buffer.require_nonempty()?;
    if process.sigma_per_sample == 0.0 {
        return Ok(buffer.clone());
    }
    let samples = buffer
        .samples
        .iter()
        .map(|s| s * Complex64::cis(process.next_phase()))
        .collect();
    Ok(buffer.with_samples(samples))
}

/// Frequency shift by `cfo_hz`.
pub fn apply_cfo(buffer: &ComplexSampleBuffer, cfo_hz: f64) -> Result<ComplexSampleBuffer> {
    let fs = buffer.sample_rate_hz;
    if !(cfo_hz.abs() < fs / 2.0) {
        return Err(Error::CfoAliasing {
            cfo_hz,
            sample_rate_hz: fs,
        });
    }
    if cfo_hz == 0.0 {
        return Ok(buffer.clone());
    }
    let w = 2.0 * PI * cfo_hz / fs;
    let samples = buffer
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| s * Complex64::cis(w * n as f64))
        .collect();
    Ok(buffer.with_samples(samples))
}

/// Image-injection coefficients `(alpha, beta)` with `out = alpha*s + beta*conj(s)`.
///
/// The I branch has amplitude gain `10^(g/40)`, the Q branch `10^(-g/40)`
/// and its LO is skewed by `phase_rad`:
/// `I' = gI*I`, `Q' = gQ*(Q cos(phi) - I sin(phi))`.
pub fn iq_imbalance_coefficients(gain_db: f64, phase_rad: f64) -> (Complex64, Complex64) {
    let gi = 10f64.powf(gain_db / 40.0);
    let gq = 10f64.powf(-gain_db / 40.0);
    let alpha = (Complex64::new(gi, 0.0) + Complex64::from_polar(gq, -phase_rad)) / 2.0;
    let beta = (Complex64::new(gi, 0.0) - Complex64::from_polar(gq, phase_rad)) / 2.0;
    (alpha, beta)
}

pub fn apply_iq_imbalance(
    buffer: &ComplexSampleBuffer,
    gain_db: f64,
    phase_rad: f64,
) -> Result<ComplexSampleBuffer> {
    buffer.require_nonempty()?;
    if gain_db == 0.0 && phase_rad == 0.0 {
        return Ok(buffer.clone());
    }
    let gi = 10f64.powf(gain_db / 40.0);
    let gq = 10f64.powf(-gain_db / 40.0);
    let (sin, cos) = phase_rad.sin_cos();
    let samples = buffer
        .samples
        .iter()
        .map(|s| Complex64::new(gi * s.re, gq * (s.im * cos - s.re * sin)))
        .collect();
    Ok(buffer.with_samples(samples))
}

fn add_dc(buffer: &mut ComplexSampleBuffer, dc: Complex64) {
    if dc != Complex64::new(0.0, 0.0) {
        for s in &mut buffer.samples {
            *s += dc;
        }
    }
}

/// Stamp a transmitter's impairments onto an ideal waveform.
pub fn apply_device(
    buffer: &ComplexSampleBuffer,
    profile: &DeviceProfile,
) -> Result<ComplexSampleBuffer> {
    let mut out = apply_iq_imbalance(
        buffer,
        profile.iq_gain_imbalance_db,
        profile.iq_phase_imbalance_rad,
    )?;
    out = apply_phase_noise(
        &out,
        PhaseNoiseProcess::from_magnitude(
            profile.phase_noise_magnitude,
            buffer.sample_rate_hz,
            profile.rng_seed,
        ),
    )?;
    out = apply_cfo(&out, profile.cfo_hz)?;
    add_dc(&mut out, profile.dc_offset);
    profile.pa.apply(&mut out.samples);
    Ok(out)
}

/// Apply a receiver's impairments to what arrives at its antenna.
pub fn apply_receiver(
    buffer: &ComplexSampleBuffer,
    profile: &ReceiverProfile,
) -> Result<ComplexSampleBuffer> {
    let mut out = apply_iq_imbalance(
        buffer,
        profile.iq_gain_imbalance_db,
        profile.iq_phase_imbalance_rad,
    )?;
    out = apply_phase_noise(
        &out,
        PhaseNoiseProcess::from_magnitude(
            profile.phase_noise_magnitude,
            buffer.sample_rate_hz,
            profile.rng_seed,
        ),
    )?;
    out = apply_cfo(&out, profile.cfo_hz)?;
    add_dc(&mut out, profile.dc_offset);
    if profile.gain_db != 0.0 {
        let g = 10f64.powf(profile.gain_db / 20.0);
        for s in &mut out.samples {
            *s *= g;
        }
    }
    Ok(out)
}

/// Ranges from which device impairments are drawn.
///
/// Each parameter is stratified: the range is cut into `count` equal slots,
/// one value is drawn uniformly inside each slot and the slots are shuffled
/// across devices. Ranges are symmetric (`±max`) except phase noise and DC
/// magnitude, which are `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpread {
    pub phase_noise_min: f64,
    pub phase_noise_max: f64,
    pub cfo_max_hz: f64,
    pub iq_gain_max_db: f64,
    pub iq_phase_max_rad: f64,
    pub dc_min: f64,
    pub dc_max: f64,
}

impl Default for PopulationSpread {
    fn default() -> Self {
        Self {
            phase_noise_min: 0.05,
            phase_noise_max: 0.45,
            cfo_max_hz: 300.0,
            iq_gain_max_db: 0.3,
            iq_phase_max_rad: 0.02,
            dc_min: 0.0,
            dc_max: 0.002,
        }
    }
}

impl PopulationSpread {
    /// No diversity at all: every device is ideal.
    pub fn zero() -> Self {
        Self {
            phase_noise_min: 0.0,
            phase_noise_max: 0.0,
            cfo_max_hz: 0.0,
            iq_gain_max_db: 0.0,
            iq_phase_max_rad: 0.0,
            dc_min: 0.0,
            dc_max: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.phase_noise_min >= 0.0
            && self.phase_noise_max >= self.phase_noise_min
            && self.cfo_max_hz >= 0.0
            && self.iq_gain_max_db >= 0.0
            && self.iq_phase_max_rad >= 0.0
            && self.dc_min >= 0.0
            && self.dc_max >= self.dc_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad population spread {self:?}")))
        }
    }
}

fn stratified(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    let width = (hi - lo) / count as f64;
    let mut v: Vec<f64> = (0..count)
        .map(|i| lo + (i as f64 + rng.random::<f64>()) * width)
        .collect();
    v.shuffle(rng);
    v
}

/// A population of `count` devices drawn from `spread` with `rng_seed`.
pub fn generate_population(
    count: usize,
    rng_seed: u64,
    spread: &PopulationSpread,
) -> Result<Vec<DeviceProfile>> {
    if count < 2 {
        return Err(Error::PopulationTooSmall(count));
    }
    spread.validate()?;
    let mut rng = seed::rng(seed::derive(rng_seed, 0x706f_70));
    let pn = stratified(&mut rng, count, spread.phase_noise_min, spread.phase_noise_max);
    let cfo = stratified(&mut rng, count, -spread.cfo_max_hz, spread.cfo_max_hz);
    let gain = stratified(&mut rng, count, -spread.iq_gain_max_db, spread.iq_gain_max_db);
    let phase = stratified(&mut rng, count, -spread.iq_phase_max_rad, spread.iq_phase_max_rad);
    let dc_mag = stratified(&mut rng, count, spread.dc_min, spread.dc_max);
    let profiles = (0..count)
        .map(|i| {
            let dc_arg = rng.random_range(-PI..PI);
            DeviceProfile {
                device_id: i as u32,
                phase_noise_magnitude: pn[i],
                cfo_hz: cfo[i],
                iq_gain_imbalance_db: gain[i],
                iq_phase_imbalance_rad: phase[i],
                dc_offset: if dc_mag[i] == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(dc_mag[i], dc_arg)
                },
                rng_seed: seed::derive(rng_seed, 1000 + i as u64),
                pa: PaModel::Linear,
            }
        })
        .collect();
    Ok(profiles)
}

/// True when every pair of profiles differs in at least one impairment.
pub fn pairwise_distinct(profiles: &[DeviceProfile]) -> bool {
    let mut keys: Vec<[u64; 6]> = profiles.iter().map(DeviceProfile::impairment_key).collect();
    keys.sort_unstable();
    keys.windows(2).all(|w| w[0] != w[1])
}

/// On-disk population file (TOML).
///
/// ```toml
/// count = 25
/// seed = 7
///
/// [[device]]
/// device_id = 0
/// phase_noise_magnitude = 0.21
/// cfo_hz = -113.0
/// iq_gain_imbalance_db = 0.12
/// iq_phase_imbalance_rad = -0.004
/// dc_offset = [0.0011, -0.0003]
/// rng_seed = 123
///
/// [[receiver]]
/// receiver_id = 1
/// ...
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationFile {
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub spread: PopulationSpread,
    #[serde(rename = "device")]
    pub devices: Vec<DeviceProfile>,
    #[serde(rename = "receiver", default)]
    pub receivers: Vec<ReceiverProfile>,
}

impl PopulationFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::InvalidConfig(format!("cannot serialise population: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let pop: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if pop.devices.len() != pop.count {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("count {} but {} devices listed", pop.count, pop.devices.len()),
            });
        }
        Ok(pop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp;
    use crate::lora::{synthesize_chirp, synthesize_transmission, LoRaConfig, SymbolStream};

    const FS: f64 = 1e6;

    fn tone(freq: f64, n: usize) -> ComplexSampleBuffer {
        let s = (0..n)
            .map(|i| Complex64::cis(2.0 * PI * freq * i as f64 / FS))
            .collect();
        ComplexSampleBuffer::new(s, FS).unwrap()
    }

    fn lora_tx() -> ComplexSampleBuffer {
        let p = SymbolStream::random(7, 16, 1);
        synthesize_transmission(&LoRaConfig::default(), &p, FS, 0.05).unwrap()
    }

    #[test]
    fn zero_phase_noise_is_identity() {
        let b = lora_tx();
        let out = apply_phase_noise(&b, PhaseNoiseProcess::new(0.0, 5)).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn phase_noise_preserves_magnitude() {
        let b = lora_tx();
        let out = apply_phase_noise(&b, PhaseNoiseProcess::from_magnitude(0.4, FS, 5)).unwrap();
        for (o, i) in out.samples.iter().zip(&b.samples) {
            assert!((o.norm() - i.norm()).abs() < 1e-12);
        }
        assert_ne!(out, b);
    }

    #[test]
    fn magnitude_mapping_is_rate_invariant() {
        let s1 = sigma_per_sample(0.2, 1e6);
        let s2 = sigma_per_sample(0.2, 4e6);
        assert!((s1 * s1 * 1e6 - s2 * s2 * 4e6).abs() < 1e-12);
        assert!((s1 - 0.2 * (0.125f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cfo_shifts_and_inverts() {
        let dc = tone(0.0, 8192);
        let shifted = apply_cfo(&dc, 1000.0).unwrap();
        let psd = dsp::welch(&shifted.samples, FS, 4096);
        assert!((psd.peak_freq() - 1000.0).abs() <= FS / 4096.0 / 2.0 + 1e-9);

        let b = lora_tx();
        let back = apply_cfo(&apply_cfo(&b, 2500.0).unwrap(), -2500.0).unwrap();
        for (x, y) in back.samples.iter().zip(&b.samples) {
            assert!((x - y).norm() < 1e-10);
        }
        assert_eq!(apply_cfo(&b, 0.0).unwrap(), b);
        assert!(matches!(apply_cfo(&b, 5e5), Err(Error::CfoAliasing { .. })));
    }

    #[test]
    fn iq_imbalance_matches_image_model() {
        let b = lora_tx();
        assert_eq!(apply_iq_imbalance(&b, 0.0, 0.0).unwrap(), b);
        let (alpha, beta) = iq_imbalance_coefficients(0.8, 0.05);
        let out = apply_iq_imbalance(&b, 0.8, 0.05).unwrap();
        for (o, s) in out.samples.iter().zip(&b.samples) {
            let model = alpha * s + beta * s.conj();
            assert!((o - model).norm() < 1e-12);
        }
    }

    fn image_ratio_db(gain_db: f64, phase: f64) -> f64 {
        let f = 100.0 * FS / 4096.0;
        let out = apply_iq_imbalance(&tone(f, 65536), gain_db, phase).unwrap();
        let psd = dsp::welch(&out.samples, FS, 4096);
        10.0 * (psd.at(-f) / psd.at(f)).log10()
    }

    #[test]
    fn image_rejection_matches_closed_form() {
        for (g, p) in [(0.5, 0.0), (1.0, 0.03), (0.0, 0.1), (2.0, -0.05)] {
            let (a, b) = iq_imbalance_coefficients(g, p);
            let analytic = 10.0 * (b.norm_sqr() / a.norm_sqr()).log10();
            let measured = image_ratio_db(g, p);
            assert!((analytic - measured).abs() < 0.5, "{g},{p}: {analytic} vs {measured}");
        }
    }

    #[test]
    fn image_grows_with_imbalance() {
        let ratios: Vec<f64> = (1..=5)
            .map(|k| image_ratio_db(0.2 * k as f64, 0.01 * k as f64))
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    }

    #[test]
    fn ideal_device_chain_is_identity() {
        let b = lora_tx();
        assert_eq!(apply_device(&b, &DeviceProfile::ideal(0)).unwrap(), b);
        assert_eq!(apply_receiver(&b, &ReceiverProfile::ideal(0)).unwrap(), b);
    }

    #[test]
    fn device_chain_is_deterministic_and_distinct() {
        let b = synthesize_chirp(&LoRaConfig::default(), 0, FS).unwrap();
        let pop = generate_population(4, 11, &PopulationSpread::default()).unwrap();
        let a1 = apply_device(&b, &pop[0]).unwrap();
        let a2 = apply_device(&b, &pop[0]).unwrap();
        let other = apply_device(&b, &pop[1]).unwrap();
        assert_eq!(a1, a2);
        let diff = a1
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(diff > 1e-6);
    }

    #[test]
    fn receiver_chain_is_deterministic_and_distinct() {
        let b = synthesize_chirp(&LoRaConfig::default(), 0, FS).unwrap();
        let r1 = ReceiverProfile {
            phase_noise_magnitude: 0.1,
            gain_db: 3.0,
            dc_offset: Complex64::new(0.001, 0.0),
            rng_seed: 4,
            ..ReceiverProfile::ideal(1)
        };
        let r2 = ReceiverProfile {
            iq_gain_imbalance_db: 0.5,
            ..r1.clone()
        };
        assert_eq!(apply_receiver(&b, &r1).unwrap(), apply_receiver(&b, &r1).unwrap());
        let d = apply_receiver(&b, &r1)
            .unwrap()
            .samples
            .iter()
            .zip(&apply_receiver(&b, &r2).unwrap().samples)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(d > 1e-6);
    }

    #[test]
    fn population_is_deterministic_and_spans_configured_ranges() {
        let spread = PopulationSpread::default();
        let a = generate_population(25, 42, &spread).unwrap();
        assert_eq!(a, generate_population(25, 42, &spread).unwrap());
        assert_ne!(a, generate_population(25, 43, &spread).unwrap());
        assert!(pairwise_distinct(&a));
        let lo = a.iter().map(|d| d.phase_noise_magnitude).fold(f64::MAX, f64::min);
        let hi = a.iter().map(|d| d.phase_noise_magnitude).fold(f64::MIN, f64::max);
        assert!(lo <= 0.05 + 0.4 / 25.0 && hi >= 0.4, "{lo}..{hi}");
        let ids: Vec<u32> = a.iter().map(|d| d.device_id).collect();
        assert_eq!(ids, (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn zero_spread_population_is_ideal() {
        let pop = generate_population(5, 1, &PopulationSpread::zero()).unwrap();
        for p in &pop {
            assert_eq!(p.impairment_key(), DeviceProfile::ideal(0).impairment_key());
        }
    }

    #[test]
    fn population_too_small() {
        assert!(matches!(
            generate_population(1, 0, &PopulationSpread::default()),
            Err(Error::PopulationTooSmall(1))
        ));
    }

    #[test]
    fn population_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("population.toml");
        let file = PopulationFile {
            count: 3,
            seed: 9,
            spread: PopulationSpread::default(),
            devices: generate_population(3, 9, &PopulationSpread::default()).unwrap(),
            receivers: vec![ReceiverProfile::ideal(1)],
        };
        file.write(&path).unwrap();
        assert_eq!(PopulationFile::read(&path).unwrap(), file);
    }
}
