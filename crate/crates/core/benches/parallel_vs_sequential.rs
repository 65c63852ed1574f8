use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cempca::cempca::{fit_cempca, CempcaConfig};
use cempca::data::{gen_fcps, knn_graph_with, FcpsShape};
use cempca::mixture::{kmeans, KmeansOptions};
use cempca::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn knn(c: &mut Criterion) {
    let data = gen_fcps(FcpsShape::Chainlink, 1000, 1).unwrap().x;
    let mut group = c.benchmark_group("knn_graph_n1000_k15");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| knn_graph_with(black_box(&data), 15, exec).unwrap())
        });
    }
    group.finish();
}

fn kmeans_restarts(c: &mut Criterion) {
    let data = gen_fcps(FcpsShape::Hepta, 2000, 1).unwrap().x;
    let mut group = c.benchmark_group("kmeans_20_restarts_n2000");
    for (name, exec) in MODES {
        let opts = KmeansOptions {
            execution: exec,
            ..KmeansOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| kmeans(black_box(&data), 7, opts).unwrap())
        });
    }
    group.finish();
}

fn cempca_restarts(c: &mut Criterion) {
    let data = gen_fcps(FcpsShape::Lsun3d, 404, 1).unwrap().x;
    let mut group = c.benchmark_group("cempca_20_restarts_lsun3d");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = CempcaConfig::new(4);
        cfg.p = Some(3);
        cfg.execution = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| fit_cempca(black_box(&data), cfg, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, knn, kmeans_restarts, cempca_restarts);
criterion_main!(benches);
