//! Throughput of the word-parallel evaluator and the exhaustive checker on
//! the published networks.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sortnet_core::generators::{batcher_oddeven_sort, known_network};
use sortnet_core::network::BitVector;
use sortnet_core::verify::{verify_01_with, VerifyOptions};

fn bench_exhaustive_verification(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_01");
    for name in ["paper17d10", "paper19d11", "paper20d11"] {
        let network = known_network(name).unwrap();
        group.throughput(Throughput::Elements(1 << network.n()));
        for threads in [1usize, 4] {
            let options = VerifyOptions {
                exhaustive_limit: 26,
                threads,
            };
            group.bench_with_input(
                BenchmarkId::new(name, format!("{threads}t")),
                &network,
                |b, network| {
                    b.iter(|| {
                        assert!(verify_01_with(network, &options).unwrap().sorts_all());
                    })
                },
            );
        }
    }
    group.finish();
}

fn bench_batch_evaluation(c: &mut Criterion) {
    let network = known_network("paper20d11").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs: Vec<BitVector> = (0..4096)
        .map(|_| {
            let bits: Vec<bool> = (0..20).map(|_| rng.gen_bool(0.5)).collect();
            BitVector::from_bits(&bits)
        })
        .collect();
    let mut group = c.benchmark_group("evaluate_batch");
    group.throughput(Throughput::Elements(inputs.len() as u64));
    group.bench_function("paper20d11/4096", |b| {
        b.iter(|| network.evaluate_batch(&inputs))
    });
    group.finish();
}

fn bench_batcher_construction(c: &mut Criterion) {
    c.bench_function("batcher_oddeven_sort/32", |b| {
        b.iter(|| batcher_oddeven_sort(32))
    });
}

criterion_group!(
    benches,
    bench_exhaustive_verification,
    bench_batch_evaluation,
    bench_batcher_construction
);
criterion_main!(benches);
