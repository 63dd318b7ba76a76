use cac_core::dsp::{log_mel, DspConfig};
use cac_core::eval::roc;
use cac_core::experiment::QUICKSTART_NET;
use cac_core::models::{train_step, ConvNet, ConvNetSpec, Sgd, TrainConfig};
use cac_core::rng::stream;
use cac_core::{AudioClip, LogMelPatch};
use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::Rng as _;
use std::hint::black_box;

fn noise_clip(n: usize) -> AudioClip {
    let mut rng = stream(1, &[]);
    AudioClip::new((0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect(), 16_000, "bench")
}

fn features(c: &mut Criterion) {
    let cfg = DspConfig::default();
    let clip = noise_clip(32_000);
    c.bench_function("log_mel 2 s", |b| b.iter(|| log_mel(black_box(&clip), &cfg).unwrap()));
}

fn network(c: &mut Criterion) {
    let mut rng = stream(2, &[]);
    let patches: Vec<LogMelPatch> =
        (0..8).map(|_| LogMelPatch::new(Array2::from_shape_fn((64, 201), |_| rng.random_range(-1.0f32..1.0)))).collect();
    for (name, layout) in [("default", ConvNetSpec::default().to_string()), ("quickstart", QUICKSTART_NET.to_string())] {
        let spec: ConvNetSpec = layout.parse().unwrap();
        let mut net = ConvNet::<f32>::new(&spec, (1, 64, 201), &mut stream(3, &[])).unwrap();
        c.bench_function(&format!("forward {name}"), |b| b.iter(|| net.predict_pos(black_box(&patches[0])).unwrap()));
        let batch: Vec<(&LogMelPatch, bool)> = patches.iter().enumerate().map(|(i, p)| (p, i % 2 == 0)).collect();
        let cfg = TrainConfig { batch_size: 8, ..Default::default() };
        let mut opt = Sgd::new();
        let mut step_rng = stream(4, &[]);
        c.bench_function(&format!("train_step {name} batch 8"), |b| {
            b.iter(|| train_step(&mut net, &mut opt, black_box(&batch), &cfg, 0, 0, &mut step_rng).unwrap())
        });
    }
}

fn evaluation(c: &mut Criterion) {
    let mut rng = stream(5, &[]);
    let scores: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
    c.bench_function("roc 1000", |b| b.iter(|| roc(black_box(&scores), black_box(&labels)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = features, network, evaluation
}
criterion_main!(benches);
