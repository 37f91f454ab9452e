use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use ctrlab_core::datagen::Stream;
use ctrlab_core::model::ranking_loss;
use ctrlab_core::*;

const N: u64 = 10_000;

fn stream() -> Stream {
    let spec = StreamSpec {
        vocab_per_field: 400,
        base_ctr: 0.02,
        ..StreamSpec::default()
    };
    let truth = Arc::new(GroundTruth::new(&spec).unwrap());
    Stream::new(truth, HashConfig::new(4096, 1).unwrap()).unwrap()
}

fn generation(c: &mut Criterion) {
    let s = stream();
    let mut g = c.benchmark_group("generation");
    g.throughput(Throughput::Elements(N));
    g.bench_function("examples", |b| b.iter(|| s.iter(0, N).map(|(x, p)| x.features.len() as f64 + p).sum::<f64>()));
    g.finish();
}

fn training(c: &mut Criterion) {
    let examples: Vec<Example> = stream().iter(0, N).map(|(x, _)| x).collect();
    let mut g = c.benchmark_group("model");
    g.throughput(Throughput::Elements(N));
    for (name, arch) in [("linear", Arch::Linear), ("mlp16", Arch::Mlp { hidden: 16 })] {
        let model = CtrModel::new(arch, HashConfig::new(4096, 1).unwrap(), OptimizerConfig::default(), 1).unwrap();
        g.bench_function(format!("predict/{name}"), |b| {
            b.iter(|| examples.iter().map(|x| model.predict(black_box(x))).sum::<f64>())
        });
        g.bench_function(format!("step/{name}"), |b| {
            b.iter_batched_ref(
                || model.clone(),
                |m| {
                    for x in &examples {
                        m.step(x, x.y());
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn ranking(c: &mut Criterion) {
    let rng = Rng::new(3, "bench");
    let window: Vec<(f64, bool)> = (0..250_000u64)
        .map(|i| (rng.uniform01(&[i]), rng.uniform01(&[i, 1]) < 0.05))
        .collect();
    let mut g = c.benchmark_group("metrics");
    g.throughput(Throughput::Elements(window.len() as u64));
    g.bench_function("ranking_loss/250k", |b| b.iter(|| ranking_loss(black_box(&window)).unwrap()));
    g.finish();
}

criterion_group!(benches, generation, training, ranking);
criterion_main!(benches);
