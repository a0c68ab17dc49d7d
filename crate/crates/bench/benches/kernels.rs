use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use etrig_bench::fixture;
use etrig_core::corpus::{encode, generate_synthetic, SynthConfig, Window};
use etrig_core::decoder::{viterbi, Emissions, Tagger, TransitionModel};
use etrig_core::embeddings::{sgns_pair_loss_grad, skipgram_train, SgnsConfig};
use etrig_core::network::{sgd_step, Gradients};

fn network(c: &mut Criterion) {
    let (model, data) = fixture(50);
    let indices = encode(data[0].chars(), model.embedding.vocab());
    let window = Window::at(&indices, 3, model.radius);
    let gold = data[0].tags()[3];

    c.bench_function("mlp forward", |b| b.iter(|| model.forward(black_box(&window)).unwrap()));
    c.bench_function("mlp forward+backward+sgd", |b| {
        b.iter_batched(
            || model.clone(),
            |mut m| {
                let cache = m.forward(&window).unwrap();
                let g: Gradients = m.backward(&window, gold, &cache).unwrap();
                sgd_step(&mut m, &g, 0.01, 1e-4).unwrap();
                m
            },
            BatchSize::LargeInput,
        )
    });
    c.bench_function("emissions 20 chars", |b| {
        b.iter(|| model.emissions(black_box(&data[0].chars()[..data[0].len().min(20)])).unwrap())
    });
}

fn decoder(c: &mut Criterion) {
    let (model, data) = fixture(50);
    let em: Emissions = model.emissions(data[0].chars()).unwrap();
    let tm = TransitionModel::uniform(true);
    c.bench_function("viterbi one sentence", |b| b.iter(|| viterbi(black_box(&em), &tm).unwrap()));
}

fn sgns(c: &mut Criterion) {
    let v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 0.1).collect();
    let u: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos() * 0.1).collect();
    let negs: Vec<Vec<f64>> = (0..5).map(|k| v.iter().map(|x| x * k as f64).collect()).collect();
    let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
    c.bench_function("sgns pair gradient d=50 k=5", |b| {
        b.iter(|| sgns_pair_loss_grad(black_box(&v), &u, &refs).unwrap())
    });

    let corpus = generate_synthetic(&SynthConfig { labeled: 10, unlabeled: 2000, ..SynthConfig::default() }, 1).unwrap();
    let cfg = SgnsConfig { epochs: 1, ..SgnsConfig::default() };
    let mut group = c.benchmark_group("sgns epoch");
    group.sample_size(10);
    group.bench_function("2000 sentences", |b| b.iter(|| skipgram_train(&corpus.unlabeled, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, network, decoder, sgns);
criterion_main!(benches);
