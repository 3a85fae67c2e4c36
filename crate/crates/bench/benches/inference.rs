use std::hint::black_box;

use cascade_edl::evidential::edl_loss_logits;
use cascade_edl::model::Depth;
use cascade_edl::runtime::{infer_with_exits, quantize_model, ExitPolicy, ExitRule};
use cascade_edl::signal::MfccExtractor;
use cascade_edl_bench::fixture;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn mfcc(c: &mut Criterion) {
    let f = fixture(8, 3);
    let ex = MfccExtractor::new(&f.preprocess.features).unwrap();
    let signal = &f.data.samples[0].signal;
    c.bench_function("mfcc/1s_4khz", |b| b.iter(|| ex.extract(black_box(signal)).unwrap()));
}

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    for channels in [16, 32] {
        let f = fixture(channels, 3);
        let x = &f.features.inputs[0];
        for depth in [Depth::Shallow, Depth::Deep] {
            let id = BenchmarkId::new(format!("{depth:?}").to_lowercase(), channels);
            g.bench_with_input(id, &depth, |b, &d| b.iter(|| f.model.forward(black_box(x), d).unwrap()));
        }
    }
    g.finish();
}

fn early_exit(c: &mut Criterion) {
    let f = fixture(16, 3);
    let q = quantize_model(&f.model, &f.features.inputs).unwrap();
    let batch = &f.features.inputs[..32];
    let mut g = c.benchmark_group("early_exit");
    g.sample_size(20);
    for tau in [0.0, 0.5, 1.0] {
        let policy = ExitPolicy::new(tau, ExitRule::AllHeads).unwrap();
        g.bench_with_input(BenchmarkId::new("f32", tau), &policy, |b, p| {
            b.iter(|| infer_with_exits(&f.model, black_box(batch), p, 1, false).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("int8", tau), &policy, |b, p| {
            b.iter(|| infer_with_exits(&q, black_box(batch), p, 1, false).unwrap())
        });
    }
    g.finish();
}

fn loss(c: &mut Criterion) {
    let logits: Vec<[f64; 2]> =
        (0..96).map(|i| [(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.11).cos() * 3.0]).collect();
    let labels: Vec<u8> = (0..96).map(|i| (i % 3 == 0) as u8).collect();
    c.bench_function("edl_loss/96_heads", |b| {
        b.iter(|| edl_loss_logits(black_box(&logits), black_box(&labels), 0.1, 1.0).unwrap())
    });
}

criterion_group!(benches, mfcc, forward, early_exit, loss);
criterion_main!(benches);
