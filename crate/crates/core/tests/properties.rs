use std::collections::BTreeSet;

use lorafp_core::capture::{dft, to_fft_frame, to_iq_frame, Frame, FrameSource, Representation};
use lorafp_core::channel::{realize_channel, Location, ScenarioSpec};
use lorafp_core::cnn::{split_frames, SplitSpec};
use lorafp_core::impairments::{apply_phase_noise, PhaseNoiseProcess};
use lorafp_core::lora::{synthesize_chirp, LoRaConfig};
use lorafp_core::sigmf::{read_recording, write_recording, RecordingMeta, ScenarioFields};
use lorafp_core::ComplexSampleBuffer;
use num_complex::Complex64;
use proptest::prelude::*;

fn src() -> FrameSource {
    FrameSource {
        scenario_id: "p".into(),
        transmission: 0,
        window: 0,
    }
}

fn samples(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..max_len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chirps_have_unit_envelope(sf in 7u8..=10, frac in 0.0f64..1.0) {
        let cfg = LoRaConfig::with_sf(sf);
        let symbol = ((cfg.chips() as f64 * frac) as u32).min(cfg.chips() - 1);
        let c = synthesize_chirp(&cfg, symbol, 1e6).unwrap();
        prop_assert_eq!(c.len(), cfg.samples_per_symbol(1e6));
        prop_assert!(c.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn phase_noise_keeps_magnitudes(x in samples(400), m in 0.0f64..1.0, seed in any::<u64>()) {
        let b = ComplexSampleBuffer::new(x, 1e6).unwrap();
        let out = apply_phase_noise(&b, PhaseNoiseProcess::from_magnitude(m, 1e6, seed)).unwrap();
        for (a, o) in b.samples.iter().zip(&out.samples) {
            prop_assert!((a.norm() - o.norm()).abs() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn frames_have_unit_rms_and_parseval_holds(x in samples(300)) {
        prop_assume!(x.iter().any(|c| c.norm() > 1e-3));
        for f in [to_iq_frame(&x, 0, src()), to_fft_frame(&x, 0, src())] {
            prop_assert!((f.rms() - 1.0).abs() < 1e-9);
            prop_assert_eq!(f.data.len(), 2 * x.len());
        }
        let time: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let freq: f64 = dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-10 * time);
    }

    #[test]
    fn channels_have_unit_power(day in 1u32..30, link in any::<u64>(), loc in 0usize..3) {
        let spec = ScenarioSpec::preset("p", day, Location::ALL[loc], 1, 1, 8);
        let ch = realize_channel(&spec, link).unwrap();
        prop_assert!((ch.tap_power() - 1.0).abs() < 1e-12);
        prop_assert_eq!(ch.taps.len(), spec.num_taps);
    }

    #[test]
    fn recordings_round_trip(x in samples(500), day in 0u32..9, tx in 0u32..50) {
        // Values representable in f32 come back bit-exact.
        let x: Vec<Complex64> = x.iter().map(|c| Complex64::new(c.re as f32 as f64, c.im as f32 as f64)).collect();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("r");
        let meta = RecordingMeta::new(3, ScenarioFields {
            scenario_id: "p".into(),
            day,
            location: Location::Office,
            config_id: 2,
            receiver_id: 1,
            transmission: tx,
        });
        let buf = ComplexSampleBuffer::new(x, 1e6).unwrap();
        write_recording(&buf, &meta, &base).unwrap();
        let (back, m2) = read_recording(&base).unwrap();
        prop_assert_eq!(&back.samples, &buf.samples);
        prop_assert_eq!(m2.scenario, meta.scenario);
    }

    #[test]
    fn splits_partition_without_leakage(
        classes in 2u32..5,
        txs in 3u32..8,
        windows in 1u32..4,
        seed in any::<u64>(),
    ) {
        let mut frames = Vec::new();
        for c in 0..classes {
            for t in 0..txs {
                for w in 0..windows {
                    frames.push(Frame {
                        data: vec![1.0, -1.0],
                        width: 1,
                        label: c,
                        source: FrameSource { scenario_id: "p".into(), transmission: t, window: w },
                        representation: Representation::Iq,
                    });
                }
            }
        }
        let n = frames.len();
        let spec = SplitSpec { rng_seed: seed, ..SplitSpec::default() };
        let s = split_frames(frames, &spec).unwrap();
        prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), n);
        let keys = |v: &[Frame]| v.iter().map(|f| (f.label, f.source.transmission)).collect::<BTreeSet<_>>();
        let (tr, va, te) = (keys(&s.train), keys(&s.validation), keys(&s.test));
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        for part in [&s.train, &s.validation, &s.test] {
            let labels: BTreeSet<u32> = part.iter().map(|f| f.label).collect();
            prop_assert_eq!(labels.len(), classes as usize);
        }
    }
}
