use lorafp_core::capture::{band_select, measure_oob_power, BandMode};
use lorafp_core::impairments::{apply_device, DeviceProfile};
use lorafp_core::lora::{synthesize_chirp, synthesize_transmission, LoRaConfig, SymbolStream};
use lorafp_core::ComplexSampleBuffer;
use num_complex::Complex64;
use rustfft::FftPlanner;

const FS: f64 = 1e6;
const BW: f64 = 125e3;

fn sf7(seconds: f64, seed: u64) -> ComplexSampleBuffer {
    let p = SymbolStream::random(7, 32, seed);
    synthesize_transmission(&LoRaConfig::default(), &p, FS, seconds).unwrap()
}

fn with_phase_noise(clean: &ComplexSampleBuffer, magnitude: f64, seed: u64) -> ComplexSampleBuffer {
    let mut d = DeviceProfile::ideal(0);
    d.phase_noise_magnitude = magnitude;
    d.rng_seed = seed;
    apply_device(clean, &d).unwrap()
}

/// Out-of-band to in-band energy of one periodic chirp from its exact line
/// spectrum: a back-to-back base-chirp stream has period 2^SF / BW, so the
/// DFT of one period holds every line.
fn line_spectrum_ratio_db(sf: u8) -> f64 {
    let one = synthesize_chirp(&LoRaConfig::with_sf(sf), 0, FS).unwrap();
    let n = one.len();
    let mut x = one.samples.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut x);
    let (mut inb, mut oob) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let f = if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * FS / n as f64;
        if f.abs() <= BW / 2.0 {
            inb += v.norm_sqr();
        } else {
            oob += v.norm_sqr();
        }
    }
    10.0 * (oob / inb).log10()
}

#[test]
fn ideal_chirp_ratio_matches_line_spectrum() {
    let preamble = LoRaConfig {
        preamble_symbols: 400,
        ..LoRaConfig::default()
    };
    let stream = synthesize_transmission(&preamble, &SymbolStream { symbols: vec![], rng_seed: 0 }, FS, 0.4).unwrap();
    let measured = measure_oob_power(&stream, BW).unwrap().ratio_db;
    let exact = line_spectrum_ratio_db(7);
    assert!((measured - exact).abs() < 0.5, "welch {measured} vs exact {exact}");
    // Spectral leakage of a finite chirp shrinks with its time-bandwidth product.
    let sf12 = line_spectrum_ratio_db(12);
    assert!(sf12 < -20.0 && sf12 < exact - 5.0, "sf12 {sf12}, sf7 {exact}");
}

#[test]
fn oob_ratio_rises_with_phase_noise() {
    let levels = [0.0, 0.1, 0.2, 0.4];
    let seeds = 20;
    let mean: Vec<f64> = levels
        .iter()
        .map(|&m| {
            (0..seeds)
                .map(|s| {
                    let clean = sf7(0.1, s);
                    measure_oob_power(&with_phase_noise(&clean, m, 1000 + s), BW).unwrap().ratio_db
                })
                .sum::<f64>()
                / seeds as f64
        })
        .collect();
    assert!(mean.windows(2).all(|w| w[1] > w[0]), "{mean:?}");
}

#[test]
fn in_band_filter_removes_regrowth() {
    // Beyond the transition band (edge at 1.06x the cutoff) the filter
    // leaves almost nothing of the regrowth.
    let beyond = |b: &lorafp_core::ComplexSampleBuffer| {
        let psd = lorafp_core::dsp::welch(&b.samples, FS, 4096);
        let (inside, outside) = psd.split(BW / 2.0 * 1.12);
        10.0 * (outside / inside).log10()
    };
    for m in [0.0, 0.2, 0.4] {
        let noisy = with_phase_noise(&sf7(0.2, 3), m, 9);
        let filtered = band_select(&noisy, BandMode::InBandOnly, BW).unwrap();
        let (raw, kept) = (beyond(&noisy), beyond(&filtered));
        assert!(kept <= raw - 40.0, "m={m}: raw {raw} filtered {kept}");
        let full = measure_oob_power(&noisy, BW).unwrap().ratio_db;
        let near = measure_oob_power(&filtered, BW).unwrap().ratio_db;
        assert!(near < full - 10.0, "m={m}: {full} {near}");
    }
}

#[test]
fn occupied_bandwidth_of_ideal_chirp() {
    // 99% of the power lies within the nominal channel, and not much less.
    let psd = lorafp_core::dsp::welch(&sf7(0.5, 1).samples, FS, 4096);
    let total = psd.total();
    let within = |half: f64| psd.split(half).0 / total;
    assert!(within(BW / 2.0 * 1.1) > 0.99);
    assert!(within(BW / 2.0 * 0.8) < 0.9);
}

#[test]
fn dc_and_zero_inputs_are_handled() {
    let dc = ComplexSampleBuffer::new(vec![Complex64::new(1.0, 0.0); 8192], FS).unwrap();
    let m = measure_oob_power(&dc, BW).unwrap();
    assert!(m.ratio_db < -60.0, "{}", m.ratio_db);
    assert!(m.spectrum.power_db.iter().all(|p| p.is_finite() && *p <= 0.0));
}
