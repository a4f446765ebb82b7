use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use farfield_bench::{activity, meeting, spectrogram, transcripts};
use farfield_core::gss::fit_cacgmm;
use farfield_core::metrics::cpcer;
use farfield_core::wpe::{wpe, WpeConfig};
use farfield_core::{istft, stft, StftParams};
use std::hint::black_box;

fn stft_round_trip(c: &mut Criterion) {
    let wav = meeting(4.0);
    let params = StftParams::default();
    c.bench_function("stft 4s stereo", |b| {
        b.iter(|| stft(black_box(&wav), &params).unwrap())
    });
    let spec = stft(&wav, &params).unwrap();
    c.bench_function("istft 4s stereo", |b| {
        b.iter(|| istft(black_box(&spec), &params, wav.len()).unwrap())
    });
}

fn dereverberation(c: &mut Criterion) {
    let spec = spectrogram(2.0);
    let mut group = c.benchmark_group("wpe 2s stereo");
    group.sample_size(10);
    for iterations in [1, 3] {
        let cfg = WpeConfig {
            iterations,
            ..WpeConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(iterations), &cfg, |b, cfg| {
            b.iter(|| wpe(black_box(&spec), cfg).unwrap())
        });
    }
    group.finish();
}

fn mixture_model(c: &mut Criterion) {
    let spec = spectrogram(2.0);
    let act = activity(spec.frames());
    let mut group = c.benchmark_group("cacgmm 2s stereo");
    group.sample_size(10);
    group.bench_function("10 iterations", |b| {
        b.iter(|| fit_cacgmm(black_box(&spec), &act, 10, 0).unwrap())
    });
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("cpcer");
    for streams in [2, 4, 6] {
        let (r, h) = transcripts(streams, 200);
        group.bench_with_input(
            BenchmarkId::from_parameter(streams),
            &(r, h),
            |b, (r, h)| b.iter(|| cpcer(black_box(r), black_box(h)).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(
    kernels,
    stft_round_trip,
    dereverberation,
    mixture_model,
    scoring
);
criterion_main!(kernels);
