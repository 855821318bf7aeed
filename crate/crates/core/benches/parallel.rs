//! Sequential vs rayon timings for the data-parallel kernels.

use bridgerole::analysis::{hdbscan_with, latent_correlation_scan, silhouette, umap2, UmapParams};
use bridgerole::graph::{betweenness_with, build_features_with, compute_knn_edges};
use bridgerole::par::Exec;
use bridgerole::pipeline::{build, encoder_inputs, ingest_sources, BuiltCity, PipelineConfig};
use bridgerole::synthetic::{SyntheticCity, SyntheticParams};
use bridgerole::vgae::{train_with, EncoderConfig, RgcnWeights};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn city() -> (BuiltCity, PipelineConfig) {
    let params = SyntheticParams { grid: 20, bridges: 80, shops: 400, hospitals: 40, residences: 1200, ..Default::default() };
    let docs = SyntheticCity::generate(&params);
    let config = PipelineConfig::default();
    let inputs = ingest_sources(&docs.streets, &docs.bridges, &docs.buildings, &config).expect("synthetic city ingests");
    (build(&inputs, &config, Exec::Parallel).expect("synthetic city builds"), config)
}

fn blobs(n: usize, d: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    Array2::from_shape_fn((n, d), |(i, _)| (i % 4) as f64 * 6.0 + rng.random_range(-1.0..1.0))
}

fn graph_kernels(c: &mut Criterion) {
    let (built, config) = city();
    let g = &built.graph;
    let mut group = c.benchmark_group("graph");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("betweenness", name), &exec, |b, &e| b.iter(|| betweenness_with(black_box(g), e)));
        group.bench_with_input(BenchmarkId::new("knn_edges", name), &exec, |b, &e| {
            b.iter(|| compute_knn_edges(black_box(g), &config.knn(), e))
        });
        group.bench_with_input(BenchmarkId::new("features", name), &exec, |b, &e| b.iter(|| build_features_with(black_box(g), e)));
    }
    group.finish();
}

fn encoder_kernels(c: &mut Criterion) {
    let (built, config) = city();
    let (graph, x) = encoder_inputs(&built, &config);
    let weights = RgcnWeights::init(&config.encoder, graph.num_relations(), &mut ChaCha8Rng::seed_from_u64(1));
    let short = EncoderConfig { max_epochs: 3, ..config.encoder.clone() };
    let mut group = c.benchmark_group("encoder");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("forward", name), &exec, |b, &e| b.iter(|| weights.forward(black_box(&x), &graph, e)));
        group.bench_with_input(BenchmarkId::new("train_3_epochs", name), &exec, |b, &e| b.iter(|| train_with(&graph, &x, &short, e)));
    }
    group.finish();
}

fn analysis_kernels(c: &mut Criterion) {
    let latent = blobs(600, 32);
    let target: Vec<f64> = (0..600).map(|i| (i % 7) as f64).collect();
    let plane = blobs(600, 2);
    let labels: Vec<i64> = (0..600).map(|i| (i % 4) as i64).collect();
    let umap = UmapParams { n_epochs: 100, ..Default::default() };
    let mut group = c.benchmark_group("analysis");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("hdbscan", name), &exec, |b, &e| b.iter(|| hdbscan_with(plane.view(), 15, e)));
        group.bench_with_input(BenchmarkId::new("umap", name), &exec, |b, &e| b.iter(|| umap2(latent.view(), &umap, e)));
        group.bench_with_input(BenchmarkId::new("correlation_scan", name), &exec, |b, &e| {
            b.iter(|| latent_correlation_scan(latent.view(), &target, e))
        });
    }
    group.bench_function("silhouette", |b| b.iter(|| silhouette(black_box(plane.view()), &labels)));
    group.finish();
}

criterion_group!(benches, graph_kernels, encoder_kernels, analysis_kernels);
criterion_main!(benches);
