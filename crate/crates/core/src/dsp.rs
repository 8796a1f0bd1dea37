//! Spectral estimation and FIR filtering helpers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Welch power spectral density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Bin centre frequencies in Hz, ascending from `-fs/2`.
    pub freqs_hz: Vec<f64>,
    /// Linear power per bin, same order as `freqs_hz`.
    pub power: Vec<f64>,
}

impl Psd {
    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Power in bins with `|f| <= half_width_hz`, and the rest.
    pub fn split(&self, half_width_hz: f64) -> (f64, f64) {
        self.freqs_hz
            .iter()
            .zip(&self.power)
            .fold((0.0, 0.0), |(inb, oob), (&f, &p)| {
                if f.abs() <= half_width_hz {
                    (inb + p, oob)
                } else {
                    (inb, oob + p)
                }
            })
    }

    /// Power of the bin nearest `freq_hz`.
    pub fn at(&self, freq_hz: f64) -> f64 {
        let i = self
            .freqs_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq_hz).abs().total_cmp(&(b.1 - freq_hz).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.power[i]
    }

    pub fn peak_freq(&self) -> f64 {
        let i = self
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.freqs_hz[i]
    }
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch periodogram with a periodic Hann window and 50% overlap.
///
/// Bins are returned DC-centred (`-fs/2 .. fs/2`). Caller guarantees
/// `samples.len() >= segment`.
pub fn welch(samples: &[Complex64], sample_rate_hz: f64, segment: usize) -> Psd {
    assert!(segment > 0 && samples.len() >= segment);
    let window = hann(segment);
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let hop = segment / 2;
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let mut acc = vec![0.0; segment];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= samples.len() {
        for (b, (s, w)) in buf
            .iter_mut()
            .zip(samples[start..start + segment].iter().zip(&window))
        {
            *b = s * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * wpow * segment as f64);
    let half = segment / 2;
    let mut freqs_hz = Vec::with_capacity(segment);
    let mut power = Vec::with_capacity(segment);
    for j in 0..segment {
        let k = (j + half) % segment;
        let signed = if k >= half { k as f64 - segment as f64 } else { k as f64 };
        freqs_hz.push(signed * sample_rate_hz / segment as f64);
        power.push(acc[k] * scale);
    }
    Psd { freqs_hz, power }
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= half / k as f64;
        let t2 = term * term;
        sum += t2;
        if t2 < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window `beta` for a stopband attenuation in dB.
pub fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

/// Odd Kaiser filter length for a transition width in cycles/sample.
pub fn kaiser_length(attenuation_db: f64, transition: f64) -> usize {
    let n = ((attenuation_db - 7.95) / (14.36 * transition)).ceil() as usize + 1;
    n | 1
}

/// Linear-phase windowed-sinc low-pass taps, unit DC gain.
///
/// `cutoff` is the -6 dB point in cycles/sample.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, attenuation_db: f64) -> Vec<f64> {
    let n = kaiser_length(attenuation_db, transition);
    let beta = kaiser_beta(attenuation_db);
    let alpha = (n - 1) as f64 / 2.0;
    let i0b = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 - alpha;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * x).sin() / (PI * x)
            };
            let r = x / alpha;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            sinc * w
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= dc;
    }
    taps
}

/// Full linear convolution of a complex signal with real taps, via FFT.
pub fn fft_convolve(signal: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    if signal.is_empty() || taps.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + taps.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    a[..signal.len()].copy_from_slice(signal);
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    for (bi, &t) in b.iter_mut().zip(taps) {
        *bi = Complex64::new(t, 0.0);
    }
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a.truncate(out_len);
    for x in &mut a {
        *x *= scale;
    }
    a
}

/// Magnitude response of real taps at `freq` cycles/sample.
pub fn freq_response(taps: &[f64], freq: f64) -> f64 {
    let h: Complex64 = taps
        .iter()
        .enumerate()
        .map(|(n, &t)| Complex64::from_polar(t, -2.0 * PI * freq * n as f64))
        .sum();
    h.norm()
}
