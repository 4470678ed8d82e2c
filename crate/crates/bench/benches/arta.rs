use std::hint::black_box;

use arta_bench::{config, series};
use arta_core::detector::anomaly_scores_batch;
use arta_core::metrics::{auc_roc, vus};
use arta_core::training::{detector_step, generator_step};
use arta_core::{make_windows, Batch, CurveMode, Nets, VusGrid};
use criterion::{criterion_group, criterion_main, Criterion};

fn training_steps(c: &mut Criterion) {
    let cfg = config();
    let ts = series();
    let windows = make_windows(&ts, cfg.window, 1).unwrap();
    let batch = Batch::gather(&windows[..cfg.batch], false).unwrap();
    let mut nets = Nets::init(&cfg, ts.features());
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    g.bench_function("generator_step B=32 T=100 H=64", |b| {
        b.iter(|| {
            let Nets {
                detector,
                generator,
                generator_adam,
                ..
            } = &mut nets;
            generator_step(
                &cfg,
                detector,
                generator.as_mut().unwrap(),
                generator_adam.as_mut().unwrap(),
                &batch,
            )
            .unwrap()
        })
    });
    g.bench_function("detector_step B=32 T=100 H=64", |b| {
        b.iter(|| {
            let Nets {
                detector,
                generator,
                detector_adam,
                ..
            } = &mut nets;
            detector_step(&cfg, detector, detector_adam, generator.as_ref(), &batch).unwrap()
        })
    });
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let cfg = config();
    let ts = series();
    let nets = Nets::init(&cfg, ts.features());
    let windows = make_windows(&ts, cfg.window, 1).unwrap();
    let inputs: Vec<&[f32]> = windows[..256].iter().map(|w| w.values).collect();
    let mut g = c.benchmark_group("scoring");
    g.sample_size(10);
    g.bench_function("anomaly_scores_batch 256 windows", |b| {
        b.iter(|| {
            anomaly_scores_batch(
                &nets.detector,
                black_box(&inputs),
                cfg.window,
                cfg.aggregator,
            )
            .unwrap()
        })
    });
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let n = 5000;
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 250 < 5)).collect();
    let scores: Vec<f64> = (0..n)
        .map(|i| f64::from(labels[i]) * 0.5 + ((i as f64) * 0.618).fract())
        .collect();
    let grid = VusGrid::default();
    c.bench_function("vus_pr 5000 points I=50 J=10", |b| {
        b.iter(|| vus(black_box(&scores), &labels, CurveMode::Pr, &grid).unwrap())
    });
    c.bench_function("auc_roc 5000 points I=50", |b| {
        b.iter(|| auc_roc(black_box(&scores), &labels, 50).unwrap())
    });
}

criterion_group!(benches, training_steps, scoring, metrics);
criterion_main!(benches);
