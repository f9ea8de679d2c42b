//! Shared helpers for integration tests: an integer-vector oracle (networks
//! are verified on binary inputs only; integers cross-check the principle
//! behind that) and a seeded random-network generator.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sortnet_core::network::{Comparator, Layer, Network};

/// Runs a network on integers, one comparator at a time — the oracle the
/// bit-packed evaluator is checked against, so it must stay naive.
pub fn evaluate_ints(network: &Network, input: &[i64]) -> Vec<i64> {
    assert_eq!(input.len(), network.n());
    let mut values = input.to_vec();
    for layer in network.layers() {
        for c in layer.comparators() {
            let (a, b) = (values[c.low()], values[c.high()]);
            values[c.low()] = a.min(b);
            values[c.high()] = a.max(b);
        }
    }
    values
}

pub fn ints_sorted(values: &[i64]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}

/// A random network: each layer is a non-empty random matching.
pub fn random_network(n: usize, depth: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut channels: Vec<usize> = (0..n).collect();
        channels.shuffle(&mut rng);
        let max_pairs = n / 2;
        let pairs = rng.gen_range(1..=max_pairs.max(1));
        let comparators: Vec<Comparator> = channels
            .chunks_exact(2)
            .take(pairs)
            .map(|pair| Comparator::new(pair[0], pair[1]))
            .collect();
        if comparators.is_empty() {
            continue;
        }
        layers.push(Layer::new(comparators));
    }
    Network::new(n, layers)
}
