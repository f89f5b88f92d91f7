use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use symflow_core::datasets::{generate, DatasetSpec};
use symflow_core::denoiser::{forward, loss_and_grad, Parameters};
use symflow_core::encodings::rrwp;
use symflow_core::eval::{avg_ratio, vun};
use symflow_core::flow::{noise_graph, NoiseDistribution};
use symflow_core::graph::{canonical_hash, compute_statistics, is_isomorphic, Permutation, apply_permutation};
use symflow_core::rng::stream;
use symflow_core::training::desk_model;
use symflow_core::{EncodingConfig, MetricConfig};

fn graphs(c: &mut Criterion) {
    let split = generate(&DatasetSpec::preset("sbm-desk").unwrap()).unwrap();
    let g = split.train[0].clone();
    let h = apply_permutation(&g, &Permutation::random(g.num_nodes(), &mut stream(1, "p", &[]))).unwrap();
    c.bench_function("canonical_hash/sbm-desk", |b| b.iter(|| canonical_hash(black_box(&g))));
    c.bench_function("is_isomorphic/sbm-desk", |b| b.iter(|| is_isomorphic(black_box(&g), black_box(&h))));
    c.bench_function("statistics/sbm-desk", |b| b.iter(|| compute_statistics(black_box(&g))));
    c.bench_function("rrwp_k8/sbm-desk", |b| b.iter(|| rrwp(black_box(&g), 8)));
    c.bench_function("generate/sbm-desk", |b| b.iter(|| generate(&DatasetSpec::preset("sbm-desk").unwrap())));
}

fn model(c: &mut Criterion) {
    let split = generate(&DatasetSpec::preset("sbm-desk").unwrap()).unwrap();
    let noise = NoiseDistribution::empirical(&split.train, 1, 2);
    let g1 = split.train[0].clone();
    let gt = noise_graph(&g1, 0.5, &noise, &mut stream(2, "n", &[])).unwrap();
    for enc in [
        EncodingConfig::Rrwp { k: 8 },
        EncodingConfig::Sinusoidal { d: 16, lambda: 1.0, normalized: false, coverage: 1.0 },
    ] {
        let cfg = desk_model(&enc);
        let params = Parameters::init(&cfg, &mut stream(3, "init", &[])).unwrap();
        let e = enc.encode(&gt, &mut stream(4, "e", &[])).unwrap();
        let name = if matches!(enc, EncodingConfig::Rrwp { .. }) { "rrwp" } else { "sinusoidal" };
        c.bench_function(&format!("forward/{name}"), |b| b.iter(|| forward(&gt, 0.5, &e, &params, &cfg).unwrap()));
        c.bench_function(&format!("loss_and_grad/{name}"), |b| {
            b.iter(|| loss_and_grad(&gt, 0.5, &e, &g1, 5.0, &params, &cfg).unwrap())
        });
    }
}

fn metrics(c: &mut Criterion) {
    let spec = DatasetSpec::preset("sbm-desk").unwrap();
    let split = generate(&spec).unwrap();
    let cfg = MetricConfig::default();
    let generated: Vec<_> = split.val.iter().chain(&split.test).cloned().collect();
    c.bench_function("vun/32", |b| {
        b.iter_batched(|| generated.clone(), |g| vun(&g, &split.train, &spec.params, &cfg).unwrap(), BatchSize::SmallInput)
    });
    c.bench_function("avg_ratio/32", |b| b.iter(|| avg_ratio(&generated, &split.train, &split.test, &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = graphs, model, metrics
}
criterion_main!(benches);
