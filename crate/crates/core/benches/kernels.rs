//! Parallel vs sequential timing of the two data-parallel kernels: the
//! candidate-knot scan of the spline forward pass, and batch gradient
//! accumulation for the network. Both paths produce bit-identical results;
//! these benches measure what the rayon map buys on the current machine.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rainbench_core::mars::{bench_support as mars_kernels, MarsFitConfig};
use rainbench_core::neural::{bench_support as neural_kernels, MlpNetwork};
use rainbench_core::timeseries::{fit_standardizer, lag_embed, standardize, synth_monsoon};
use rainbench_core::Matrix;
use std::hint::black_box;

fn training_rows(years: usize) -> (Matrix, Vec<f64>) {
    let series = synth_monsoon(years, 7, 0.3).unwrap();
    let standardizer = fit_standardizer(&series, 0..series.months()).unwrap();
    let z = standardize(&series.values, &standardizer);
    let ds = lag_embed(&z, 12).unwrap();
    (ds.inputs, ds.targets)
}

fn bench_knot_scan(c: &mut Criterion) {
    let (x, y) = training_rows(20);
    let config = MarsFitConfig::default();
    let mut group = c.benchmark_group("knot_scan_first_step");
    group.sample_size(10);
    for (label, sequential) in [("sequential", true), ("parallel", false)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &sequential, |b, &seq| {
            b.iter(|| black_box(mars_kernels::scan_first_step(&x, &y, &config, seq)));
        });
    }
    group.finish();
}

fn bench_batch_gradient(c: &mut Criterion) {
    let (x, y_vec) = training_rows(40);
    let y = Matrix::from_rows(&y_vec.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
    let net = MlpNetwork::init(&[12, 12, 12, 1], 7).unwrap();
    let mut group = c.benchmark_group("batch_gradient");
    for (label, sequential) in [("sequential", true), ("parallel", false)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &sequential, |b, &seq| {
            b.iter(|| black_box(neural_kernels::batch_gradient(&net, &x, &y, seq)));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_knot_scan, bench_batch_gradient);
criterion_main!(benches);
