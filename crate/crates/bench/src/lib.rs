//! Shared fixtures for the benchmarks.

use an2n::agents::Batch;
use an2n::replay::{KeyStateEntry, KeyStateQueue, Transition};
use an2n::rng::{stream, RunRng, Stream};
use ndarray::Array2;
use rand::Rng;

pub fn rng(seed: u64) -> RunRng {
    stream(seed, Stream::Eval, 99)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
}

pub fn random_batch(n: usize, state_dim: usize, action_dim: usize, seed: u64) -> Batch {
    let mut r = rng(seed);
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            state: (0..state_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
            action: (0..action_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
            reward: r.random_range(-1.0..0.0),
            next_state: (0..state_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
            done: false,
        })
        .collect();
    Batch::from_transitions(&ts.iter().collect::<Vec<_>>()).expect("non-empty batch")
}

pub fn full_queue(len: usize, dim: usize, seed: u64) -> KeyStateQueue {
    let mut r = rng(seed);
    let mut q = KeyStateQueue::new(1, len).expect("valid bounds");
    q.admit((0..len).map(|i| KeyStateEntry {
        state: (0..dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        score: -(i as f64),
        epoch: 0,
    }));
    q
}
