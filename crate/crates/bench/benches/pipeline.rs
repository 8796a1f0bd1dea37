use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use lorafp_core::capture::{band_select, to_fft_frame, BandMode, Frame, FrameSource};
use lorafp_core::cnn::{Cnn, CnnArchitecture};
use lorafp_core::impairments::{apply_device, generate_population, PopulationSpread};
use lorafp_core::lora::{synthesize_transmission, LoRaConfig, SymbolStream};

const FS: f64 = 1e6;

fn transmission(sf: u8, seconds: f64) -> lorafp_core::ComplexSampleBuffer {
    let payload = SymbolStream::random(sf, 32, 1);
    synthesize_transmission(&LoRaConfig::with_sf(sf), &payload, FS, seconds).unwrap()
}

fn source() -> FrameSource {
    FrameSource {
        scenario_id: "bench".into(),
        transmission: 0,
        window: 0,
    }
}

fn signal_chain(c: &mut Criterion) {
    let mut g = c.benchmark_group("signal");
    let n = 100_000;
    g.throughput(Throughput::Elements(n as u64));
    g.bench_function("synthesize_sf7_100k", |b| b.iter(|| transmission(7, black_box(0.1))));
    let clean = transmission(7, 0.1);
    let dev = generate_population(2, 3, &PopulationSpread::default()).unwrap().remove(1);
    g.bench_function("apply_device_100k", |b| b.iter(|| apply_device(black_box(&clean), &dev).unwrap()));
    g.bench_function("in_band_filter_100k", |b| {
        b.iter(|| band_select(black_box(&clean), BandMode::InBandOnly, 125e3).unwrap())
    });
    g.bench_function("fft_frame_8192", |b| {
        b.iter(|| to_fft_frame(black_box(&clean.samples[..8192]), 0, source()))
    });
    g.finish();
}

fn classifier(c: &mut Criterion) {
    let mut g = c.benchmark_group("cnn");
    g.sample_size(10);
    for w in [1024usize, 8192] {
        let clean = transmission(7, 0.1);
        let frames: Vec<Frame> = (0..32)
            .map(|i| to_fft_frame(&clean.samples[i * 64..i * 64 + w], (i % 10) as u32, source()))
            .collect();
        let refs: Vec<&Frame> = frames.iter().collect();
        let mut model = Cnn::<f32>::new(CnnArchitecture::new(w, 10), 1).unwrap();
        g.throughput(Throughput::Elements(refs.len() as u64));
        g.bench_with_input(BenchmarkId::new("predict_batch32", w), &w, |b, _| {
            b.iter(|| model.predict(black_box(&refs)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("train_step_batch32", w), &w, |b, _| {
            b.iter(|| model.loss_and_gradients(black_box(&refs), 1e-4, false, 7).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, signal_chain, classifier);
criterion_main!(benches);
