use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gammaquant::ggd::{brute_force_design, design_single_sided, estimate_from_moments};
use gammaquant::netsim::{fixture, forward_fixed, forward_float, QuantConfig};
use gammaquant::quantizers::{collect_stats, quantize_fm_single_sided, quantize_weights_layer};
use gammaquant::{quantize_tensor, FixedPointFormat, FlSearchConfig, SearchMode};
use gammaquant_bench::{gamma_samples, gaussian_weights};

fn fixed_point(c: &mut Criterion) {
    let xs = gaussian_weights(0.05, 1 << 16, 1);
    let fmt = FixedPointFormat::signed(8, 9).unwrap();
    c.bench_function("quantize_tensor/65536", |b| b.iter(|| quantize_tensor(black_box(&xs), fmt)));
}

fn design(c: &mut Criterion) {
    let xs = gamma_samples(2.0, 100_000, 2);
    let stats = collect_stats(&xs).unwrap();
    c.bench_function("closed_form_design", |b| {
        b.iter(|| {
            let p = estimate_from_moments(stats.mean_excl_zero, stats.var_excl_zero).unwrap();
            design_single_sided(black_box(256), &p).unwrap()
        })
    });
    let mut g = c.benchmark_group("brute_force_design");
    g.sample_size(10);
    for levels in [16u64, 256] {
        g.bench_with_input(BenchmarkId::from_parameter(levels), &levels, |b, &l| {
            b.iter(|| brute_force_design(l, black_box(&xs)).unwrap())
        });
    }
    g.finish();
}

fn fl_search(c: &mut Criterion) {
    let ws = gaussian_weights(0.05, 1 << 16, 3);
    let xs = gamma_samples(1.0, 1 << 16, 4);
    let stats = collect_stats(&xs).unwrap();
    c.bench_function("weights_fl_search", |b| {
        b.iter(|| quantize_weights_layer(black_box(&ws), &FlSearchConfig::new(8)).unwrap())
    });
    for mode in [SearchMode::Default, SearchMode::Fast] {
        let cfg = FlSearchConfig::new(8).with_mode(mode);
        c.bench_function(&format!("fm_fl_search/{mode:?}"), |b| {
            b.iter(|| quantize_fm_single_sided(black_box(&xs), &stats, &cfg).unwrap())
        });
    }
}

fn forward(c: &mut Criterion) {
    let model = fixture::reference_network(0);
    let input = fixture::synthetic_inputs(0, 2, 32);
    let q = QuantConfig::generous(&model);
    let mut g = c.benchmark_group("forward/batch32");
    g.sample_size(20);
    g.bench_function("float", |b| b.iter(|| forward_float(&model, black_box(&input)).unwrap()));
    g.bench_function("fixed", |b| b.iter(|| forward_fixed(&model, black_box(&input), &q).unwrap()));
    g.finish();
}

criterion_group!(benches, fixed_point, design, fl_search, forward);
criterion_main!(benches);
