use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;

use an2n::agents::{AgentConfig, DdpgAgent, SacAgent};
use an2n::an2n::{gate, score_returns, Discount, SimilarityConfig, SimilarityMetric};
use an2n::envs::EnvKind;
use an2n::nn::{Activation, Mlp, OutputActivation};
use an2n_bench::{full_queue, random_batch, random_matrix, rng};

fn mlp(c: &mut Criterion) {
    let net = Mlp::new(&[4, 64, 64, 1], Activation::Relu, OutputActivation::Identity, &mut rng(1)).unwrap();
    let x = random_matrix(128, 4, 2);
    let g = random_matrix(128, 1, 3);
    c.bench_function("mlp forward 128x[4,64,64,1]", |b| b.iter(|| black_box(net.forward_batch(x.view()).unwrap())));
    c.bench_function("mlp forward+backward 128x[4,64,64,1]", |b| {
        b.iter(|| {
            let cache = net.forward_cached(x.view()).unwrap();
            black_box(net.backward_cached(&cache, g.view()).unwrap())
        })
    });
}

fn gating(c: &mut Criterion) {
    let queue = full_queue(20, 4, 4);
    let center = vec![0.1; 4];
    let state = vec![0.3, -0.2, 0.5, 0.0];
    for metric in [SimilarityMetric::Cosine, SimilarityMetric::Manhattan] {
        let cfg = SimilarityConfig { metric, ..SimilarityConfig::default() };
        c.bench_function(&format!("gate 20 key states ({metric})"), |b| {
            b.iter(|| black_box(gate(black_box(&state), &queue, &cfg, &center).unwrap()))
        });
    }
}

fn returns(c: &mut Criterion) {
    let mut r = rng(5);
    let rewards: Vec<f64> = (0..200).map(|_| r.random_range(-10.0..0.0)).collect();
    let gamma = Discount::new(0.99).unwrap();
    c.bench_function("score_returns T=200", |b| {
        b.iter(|| black_box(score_returns(black_box(&rewards), -50.0, gamma).unwrap()))
    });
}

fn updates(c: &mut Criterion) {
    let spec = EnvKind::Pendulum.spec();
    let cfg = AgentConfig::default();
    let batch = random_batch(128, spec.state_dim, spec.action_dim, 6);
    let ddpg = DdpgAgent::new(&spec, &cfg, &mut rng(7)).unwrap();
    c.bench_function("ddpg update batch 128", |b| {
        b.iter_batched(|| ddpg.clone(), |mut agent| black_box(agent.update(&batch).unwrap()), BatchSize::SmallInput)
    });
    let sac = SacAgent::new(&spec, &cfg, &mut rng(8)).unwrap();
    c.bench_function("sac update batch 128", |b| {
        b.iter_batched(
            || (sac.clone(), rng(9)),
            |(mut agent, mut r)| black_box(agent.update(&batch, &mut r).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, mlp, gating, returns, updates);
criterion_main!(benches);
