//! Property tests for the evaluation semantics and the structural operations,
//! plus the derived spot checks on the published fixture networks.

use proptest::prelude::*;

use sortnet_core::generators::{batcher_oddeven_sort, known_network};
use sortnet_core::network::{BitVector, Comparator, Layer, Network};
use sortnet_core::prefix::poset_prefix;
use sortnet_core::verify::{find_counterexample, verify_01, InputFamily};

mod util;
use util::{evaluate_ints, ints_sorted, random_network};

fn arbitrary_network() -> impl Strategy<Value = Network> {
    (1usize..=8, 0usize..=5, any::<u64>())
        .prop_map(|(n, depth, seed)| random_network(n, depth, seed))
}

fn arbitrary_input(n: usize) -> impl Strategy<Value = BitVector> {
    prop::collection::vec(any::<bool>(), n).prop_map(|bits| BitVector::from_bits(&bits))
}

proptest! {
    /// Comparators move bits around but never create or destroy them.
    #[test]
    fn evaluation_conserves_the_bit_multiset(
        (network, input) in arbitrary_network()
            .prop_flat_map(|n| { let w = n.n(); (Just(n), arbitrary_input(w)) })
    ) {
        let output = network.evaluate(&input);
        prop_assert_eq!(output.count_ones(), input.count_ones());
    }

    /// Bitwise domination of inputs survives evaluation.
    #[test]
    fn evaluation_is_monotone(
        (network, a, b) in arbitrary_network().prop_flat_map(|n| {
            let w = n.n();
            (Just(n), arbitrary_input(w), arbitrary_input(w))
        })
    ) {
        let low = BitVector::from_fn(a.width(), |i| a.get(i) && b.get(i));
        let high = b;
        // low <= high bitwise by construction
        let out_low = network.evaluate(&low);
        let out_high = network.evaluate(&high);
        for i in 0..network.n() {
            prop_assert!(!out_low.get(i) || out_high.get(i));
        }
    }

    /// The word-packed batch evaluator agrees with the scalar one.
    #[test]
    fn batch_evaluation_is_pointwise(
        (network, inputs) in arbitrary_network().prop_flat_map(|n| {
            let w = n.n();
            (Just(n), prop::collection::vec(arbitrary_input(w), 0..150))
        })
    ) {
        let batched = network.evaluate_batch(&inputs);
        prop_assert_eq!(batched.len(), inputs.len());
        for (x, y) in inputs.iter().zip(&batched) {
            prop_assert_eq!(&network.evaluate(x), y);
        }
    }

    /// Construction canonicalizes layers; shuffling the comparator order
    /// changes neither the value nor the behavior.
    #[test]
    fn layer_canonicalization_is_idempotent_and_semantically_invisible(
        (network, input, seed) in arbitrary_network().prop_flat_map(|n| {
            let w = n.n();
            (Just(n), arbitrary_input(w), any::<u64>())
        })
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shuffled = Network::new(
            network.n(),
            network
                .layers()
                .iter()
                .map(|layer| {
                    let mut comparators = layer.comparators().to_vec();
                    comparators.shuffle(&mut rng);
                    Layer::new(comparators)
                })
                .collect(),
        );
        prop_assert_eq!(&shuffled, &network);
        prop_assert_eq!(shuffled.evaluate(&input), network.evaluate(&input));
    }

    /// The bit-packed evaluator agrees with the naive per-comparator integer
    /// interpreter on 0/1 integer vectors.
    #[test]
    fn evaluation_matches_the_integer_interpreter(
        (network, input) in arbitrary_network()
            .prop_flat_map(|n| { let w = n.n(); (Just(n), arbitrary_input(w)) })
    ) {
        let ints: Vec<i64> = input.iter().map(i64::from).collect();
        let expected = evaluate_ints(&network, &ints);
        let output = network.evaluate(&input);
        let as_ints: Vec<i64> = output.iter().map(i64::from).collect();
        prop_assert_eq!(as_ints, expected);
    }

    /// A counterexample exists in the all-binary family exactly when the
    /// exhaustive check says the network does not sort.
    #[test]
    fn counterexample_search_agrees_with_verification(network in arbitrary_network()) {
        let verdict = verify_01(&network).unwrap();
        let found = find_counterexample(&network, &InputFamily::AllBinary);
        prop_assert_eq!(found.is_some(), !verdict.sorts_all());
        if let Some(witness) = found {
            prop_assert!(!network.evaluate(&witness).is_sorted());
        }
    }
}

/// Dropping any channel from a sorting network leaves a sorting network of no
/// greater depth, exhaustively for widths up to 12.
#[test]
fn channel_removal_preserves_sorting_exhaustively() {
    for n in 2..=12usize {
        let sorter = batcher_oddeven_sort(n);
        assert!(verify_01(&sorter).unwrap().sorts_all());
        for channel in 0..n {
            let reduced = sorter.remove_channel(channel).unwrap();
            reduced.validate().unwrap();
            assert!(reduced.depth() <= sorter.depth());
            assert!(
                verify_01(&reduced).unwrap().sorts_all(),
                "batcher({n}) minus channel {channel}"
            );
        }
    }
}

/// Spot check on the large fixtures: removing a few channels keeps them
/// sorting (full verification of every removal would be slow, the acceptance
/// suite covers the derived 19-channel network).
#[test]
fn channel_removal_spot_checks_on_fixtures() {
    let twenty = known_network("paper20d11").unwrap();
    for channel in [0, 7, 19] {
        let reduced = twenty.remove_channel(channel).unwrap();
        assert!(verify_01(&reduced).unwrap().sorts_all(), "channel {channel}");
    }
}

/// The published 20-channel network sorts the reverse-sorted input, checked
/// against the naive integer interpreter as well.
#[test]
fn fixture_sorts_the_reverse_input() {
    let network = known_network("paper20d11").unwrap();
    let reversed = BitVector::from_fn(20, |i| i < 10);
    let output = network.evaluate(&reversed);
    assert_eq!(output.to_string(), "00000000001111111111");
    let ints: Vec<i64> = reversed.iter().map(i64::from).collect();
    assert!(ints_sorted(&evaluate_ints(&network, &ints)));
}

/// Batch evaluation on 1000 random 17-wide vectors equals per-vector
/// evaluation on the published 17-channel network.
#[test]
fn large_random_batch_matches_scalar_evaluation() {
    use rand::{Rng, SeedableRng};
    let network = known_network("paper17d10").unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let inputs: Vec<BitVector> = (0..1000)
        .map(|_| {
            let bits: Vec<bool> = (0..17).map(|_| rng.gen_bool(0.5)).collect();
            BitVector::from_bits(&bits)
        })
        .collect();
    let batched = network.evaluate_batch(&inputs);
    for (x, y) in inputs.iter().zip(&batched) {
        assert_eq!(&network.evaluate(x), y);
    }
}

/// Gate placements in separate poset blocks never let one block's inputs
/// influence another block's outputs.
#[test]
fn poset_blocks_stay_independent() {
    let prefix = poset_prefix(4, 8, &[0, 4]).unwrap();
    for bits in 0..256u64 {
        let x = BitVector::from_index(8, bits);
        let base = prefix.evaluate(&x);
        for flip in 0..8 {
            let mut flipped = x;
            flipped.set(flip, !flipped.get(flip));
            let out = prefix.evaluate(&flipped);
            let same_block = |a: usize, b: usize| (a < 4) == (b < 4);
            for channel in 0..8 {
                if !same_block(flip, channel) {
                    assert_eq!(
                        out.get(channel),
                        base.get(channel),
                        "flipping {flip} leaked into channel {channel}"
                    );
                }
            }
        }
    }
}

/// Projecting the 20-channel opening layers' outputs onto the top eight
/// wires never leaves the 8-poset's 20 patterns: the fourth layer only takes
/// pointwise minima of two poset-consistent labelings, and those stay
/// poset-consistent.
#[test]
fn figure_prefix_projection_stays_inside_the_poset_patterns() {
    use sortnet_core::prefix::figure_prefix;
    use sortnet_core::verify::output_set;
    use std::collections::BTreeSet;

    let poset_patterns: BTreeSet<u64> = output_set(&poset_prefix(8, 8, &[0]).unwrap())
        .unwrap()
        .iter()
        .map(BitVector::to_index)
        .collect();
    assert_eq!(poset_patterns.len(), 20);

    let prefix = figure_prefix("fig3-4layer").unwrap();
    let projected: BTreeSet<u64> = output_set(&prefix)
        .unwrap()
        .iter()
        .map(|v| BitVector::from_fn(8, |i| v.get(i)).to_index())
        .collect();
    assert!(
        projected.is_subset(&poset_patterns),
        "projection produced patterns outside the poset set"
    );
}

/// Extreme output bits of the 4-poset: the first output is 1 only on the
/// all-ones input, the last is 0 only on all-zeros.
#[test]
fn four_poset_extreme_output_bits() {
    let poset = poset_prefix(4, 4, &[0]).unwrap();
    for bits in 0..16u64 {
        let x = BitVector::from_index(4, bits);
        let out = poset.evaluate(&x);
        assert_eq!(out.get(0), bits == 0b1111, "first bit at input {bits:04b}");
        assert_eq!(!out.get(3), bits == 0, "last bit at input {bits:04b}");
    }
}

/// The 8-poset opening layers alone do not sort.
#[test]
fn eight_poset_prefix_has_a_counterexample() {
    let prefix = poset_prefix(8, 8, &[0]).unwrap();
    let witness = find_counterexample(&prefix, &InputFamily::AllBinary).unwrap();
    assert!(!prefix.evaluate(&witness).is_sorted());
}

/// Frozen derived fact: deleting the final layer of the 17-channel fixture
/// breaks it, with this exact lexicographically-smallest witness.
#[test]
fn fixture_without_last_layer_has_known_witness() {
    let fig2 = known_network("paper17d10").unwrap();
    let broken = fig2.truncated(fig2.depth() - 1);
    let verdict = verify_01(&broken).unwrap();
    assert_eq!(verdict.witness().unwrap().to_string(), "00000000000000110");
    assert_eq!(verdict.inputs_checked(), 7);
}

/// Removing an untouched channel is exactly wire deletion.
#[test]
fn removing_untouched_channel_only_reindexes() {
    let network = Network::new(
        5,
        vec![
            Layer::new(vec![Comparator::new(0, 1), Comparator::new(3, 4)]),
            Layer::new(vec![Comparator::new(1, 3)]),
        ],
    );
    let reduced = network.remove_channel(2).unwrap();
    assert_eq!(
        reduced,
        Network::new(
            4,
            vec![
                Layer::new(vec![Comparator::new(0, 1), Comparator::new(2, 3)]),
                Layer::new(vec![Comparator::new(1, 2)]),
            ]
        )
    );
}
