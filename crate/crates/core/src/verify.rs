//! Correctness checking of comparator networks: exhaustive 0-1 verification,
//! counterexample search over input families, output-set computation, and the
//! input-to-output influence condition every sorting network must satisfy.
//!
//! Exhaustive checks pack 64 inputs per machine word and may split the input
//! space across threads; the reported witness is always the lexicographically
//! smallest counterexample, independent of the thread count.

use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::network::{BitVector, Network, ValidationError, MAX_WIDTH};

/// Default cap on exhaustive enumeration: `2^26` inputs is a few seconds of
/// word-parallel work.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u32 = 26;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Refuse exhaustive enumeration for networks wider than this.
    pub exhaustive_limit: u32,
    /// Worker threads for partitioning the input space.
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            threads: std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1),
        }
    }
}

impl VerifyOptions {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads: threads.max(1),
            ..Self::default()
        }
    }
}

/// Result of exhaustive verification: either a proof over all binary inputs
/// or the lexicographically smallest input whose output is unsorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    SortsAll { inputs_checked: u64 },
    Counterexample {
        witness: BitVector,
        inputs_checked: u64,
    },
}

impl Verdict {
    pub fn sorts_all(&self) -> bool {
        matches!(self, Verdict::SortsAll { .. })
    }

    pub fn witness(&self) -> Option<&BitVector> {
        match self {
            Verdict::SortsAll { .. } => None,
            Verdict::Counterexample { witness, .. } => Some(witness),
        }
    }

    pub fn inputs_checked(&self) -> u64 {
        match self {
            Verdict::SortsAll { inputs_checked } => *inputs_checked,
            Verdict::Counterexample { inputs_checked, .. } => *inputs_checked,
        }
    }
}

impl Serialize for Verdict {
    /// `{"status": "sorts-all" | "counterexample", "witness"?: bitstring,
    /// "inputs_checked": count}` with channel 0 first in the witness.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Verdict::SortsAll { inputs_checked } => {
                let mut s = serializer.serialize_struct("Verdict", 2)?;
                s.serialize_field("status", "sorts-all")?;
                s.serialize_field("inputs_checked", inputs_checked)?;
                s.end()
            }
            Verdict::Counterexample {
                witness,
                inputs_checked,
            } => {
                let mut s = serializer.serialize_struct("Verdict", 3)?;
                s.serialize_field("status", "counterexample")?;
                s.serialize_field("witness", witness)?;
                s.serialize_field("inputs_checked", inputs_checked)?;
                s.end()
            }
        }
    }
}

/// The set of inputs a counterexample search ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputFamily {
    /// Every binary vector.
    AllBinary,
    /// Vectors `0^a y 1^b` with maximal `a`, `b` and `2 <= |y| <= max_window`;
    /// with `max_window = n` this is exactly the unsorted vectors.
    Windowed { max_window: usize },
    /// An explicit vector set.
    Explicit(Vec<BitVector>),
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("{n} channels exceed the exhaustive limit of {limit}; use a windowed or explicit input family")]
    AboveExhaustiveLimit { n: usize, limit: u32 },
}

/// True iff the vector is non-decreasing from channel 0 down.
pub fn is_sorted(v: &BitVector) -> bool {
    v.is_sorted()
}

/// Bit patterns of the low six index bits across a 64-input chunk:
/// `LOW_PATTERNS[s]` has bit `b` set iff `(b >> s) & 1 == 1`.
const LOW_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Fills `words[i]` with channel `i` of the 64 consecutive inputs starting at
/// `base` (channel 0 is the most significant index bit, so index order is
/// lexicographic order).
fn chunk_words(n: usize, base: u64, words: &mut [u64]) {
    for (i, w) in words.iter_mut().enumerate() {
        let shift = n - 1 - i;
        *w = if shift < 6 {
            LOW_PATTERNS[shift]
        } else if (base >> shift) & 1 == 1 {
            !0
        } else {
            0
        };
    }
}

/// One bit per batched input: set iff that output is unsorted.
fn unsorted_mask(words: &[u64]) -> u64 {
    let mut mask = 0u64;
    for i in 0..words.len().saturating_sub(1) {
        mask |= words[i] & !words[i + 1];
    }
    mask
}

fn check_exhaustible(network: &Network, options: &VerifyOptions) -> Result<(), VerifyError> {
    network.validate()?;
    let limit = options.exhaustive_limit.min(MAX_WIDTH as u32 - 1);
    if network.n() > limit as usize {
        return Err(VerifyError::AboveExhaustiveLimit {
            n: network.n(),
            limit,
        });
    }
    Ok(())
}

/// Exhaustive 0-1 check with default options; see [`verify_01_with`].
pub fn verify_01(network: &Network) -> Result<Verdict, VerifyError> {
    verify_01_with(network, &VerifyOptions::default())
}

/// Checks all `2^n` binary inputs. Returns a proof of sorting or the
/// lexicographically smallest counterexample; `inputs_checked` is the
/// witness's lexicographic position plus one.
pub fn verify_01_with(network: &Network, options: &VerifyOptions) -> Result<Verdict, VerifyError> {
    check_exhaustible(network, options)?;
    let n = network.n();
    if n < 6 {
        // A single partial chunk holds all 2^n inputs.
        let total = 1u64 << n;
        let mut words = vec![0u64; n];
        chunk_words(n, 0, &mut words);
        network.apply_to_words(&mut words);
        let mask = unsorted_mask(&words) & ((1u64 << total) - 1);
        return Ok(if mask == 0 {
            Verdict::SortsAll {
                inputs_checked: total,
            }
        } else {
            let idx = mask.trailing_zeros() as u64;
            Verdict::Counterexample {
                witness: BitVector::from_index(n, idx),
                inputs_checked: idx + 1,
            }
        });
    }

    let total = 1u64 << n;
    let chunks = total >> 6;
    let threads = options.threads.clamp(1, chunks as usize);
    let best = AtomicU64::new(u64::MAX);
    let per_thread = chunks / threads as u64;
    std::thread::scope(|scope| {
        for t in 0..threads as u64 {
            let lo = t * per_thread;
            let hi = if t + 1 == threads as u64 {
                chunks
            } else {
                (t + 1) * per_thread
            };
            let best = &best;
            scope.spawn(move || {
                let mut words = vec![0u64; n];
                for chunk in lo..hi {
                    let base = chunk << 6;
                    if chunk % 512 == 0 && base >= best.load(Ordering::Relaxed) {
                        return;
                    }
                    chunk_words(n, base, &mut words);
                    network.apply_to_words(&mut words);
                    let mask = unsorted_mask(&words);
                    if mask != 0 {
                        let idx = base + mask.trailing_zeros() as u64;
                        best.fetch_min(idx, Ordering::Relaxed);
                        return;
                    }
                }
            });
        }
    });
    Ok(match best.into_inner() {
        u64::MAX => Verdict::SortsAll {
            inputs_checked: total,
        },
        idx => Verdict::Counterexample {
            witness: BitVector::from_index(n, idx),
            inputs_checked: idx + 1,
        },
    })
}

/// The deduplicated image of all binary inputs; see [`output_set_with`].
pub fn output_set(network: &Network) -> Result<BTreeSet<BitVector>, VerifyError> {
    output_set_with(network, &VerifyOptions::default())
}

/// Evaluates every binary input and collects the distinct outputs.
pub fn output_set_with(
    network: &Network,
    options: &VerifyOptions,
) -> Result<BTreeSet<BitVector>, VerifyError> {
    check_exhaustible(network, options)?;
    let n = network.n();
    let total = 1u64 << n;
    let collect_chunk = |base: u64, count: u64, words: &mut [u64], set: &mut HashSet<u64>| {
        chunk_words(n, base, words);
        network.apply_to_words(words);
        for b in 0..count {
            let mut idx = 0u64;
            for w in words.iter() {
                idx = (idx << 1) | ((w >> b) & 1);
            }
            set.insert(idx);
        }
    };
    let mut merged: HashSet<u64> = HashSet::new();
    if n < 6 {
        let mut words = vec![0u64; n];
        collect_chunk(0, total, &mut words, &mut merged);
    } else {
        let chunks = total >> 6;
        let threads = options.threads.clamp(1, chunks as usize);
        let per_thread = chunks / threads as u64;
        let sets = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads as u64 {
                let lo = t * per_thread;
                let hi = if t + 1 == threads as u64 {
                    chunks
                } else {
                    (t + 1) * per_thread
                };
                let collect_chunk = &collect_chunk;
                handles.push(scope.spawn(move || {
                    let mut words = vec![0u64; n];
                    let mut set = HashSet::new();
                    for chunk in lo..hi {
                        collect_chunk(chunk << 6, 64, &mut words, &mut set);
                    }
                    set
                }));
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("output_set worker panicked"))
                .collect::<Vec<_>>()
        });
        for set in sets {
            merged.extend(set);
        }
    }
    Ok(merged
        .into_iter()
        .map(|idx| BitVector::from_index(n, idx))
        .collect())
}

/// Enumerates a family in the deterministic search order: fewest unsorted
/// bits first, then lexicographic.
pub fn family_vectors(n: usize, family: &InputFamily) -> Box<dyn Iterator<Item = BitVector>> {
    match family {
        InputFamily::AllBinary => Box::new(WindowOrderIter::new(n, n, true)),
        InputFamily::Windowed { max_window } => {
            Box::new(WindowOrderIter::new(n, (*max_window).min(n), false))
        }
        InputFamily::Explicit(vectors) => {
            let mut vectors = vectors.clone();
            vectors.sort_by_key(|v| (v.unsorted_window(), v.to_index()));
            vectors.dedup();
            Box::new(vectors.into_iter())
        }
    }
}

/// Returns the first input in the family (search order as in
/// [`family_vectors`]) whose output is unsorted, or `None`.
pub fn find_counterexample(network: &Network, family: &InputFamily) -> Option<BitVector> {
    family_vectors(network.n(), family).find(|x| !network.evaluate(x).is_sorted())
}

/// Iterates vectors `0^a y 1^b` (maximal `a`, `b`) by window size `|y|`
/// ascending, then lexicographically. Window size 0 (the sorted vectors) is
/// included only when `include_sorted` is set.
struct WindowOrderIter {
    n: usize,
    cap: usize,
    include_sorted: bool,
    started: bool,
    window: usize,
    // Position of the leading 1; descends because a larger zero prefix is
    // lexicographically smaller.
    a: isize,
    interior: u64,
}

impl WindowOrderIter {
    fn new(n: usize, cap: usize, include_sorted: bool) -> Self {
        Self {
            n,
            cap,
            include_sorted,
            started: false,
            window: 0,
            a: 0,
            interior: 0,
        }
    }

    fn enter_window(&mut self, window: usize) -> bool {
        if window > self.cap || window > self.n {
            return false;
        }
        self.window = window;
        self.a = (self.n - window) as isize;
        self.interior = 0;
        true
    }
}

impl Iterator for WindowOrderIter {
    type Item = BitVector;

    fn next(&mut self) -> Option<BitVector> {
        if !self.started {
            self.started = true;
            let first = if self.include_sorted { 0 } else { 2 };
            if !self.enter_window(first) {
                return None;
            }
        }
        loop {
            if self.a < 0 {
                let next_window = if self.window == 0 { 2 } else { self.window + 1 };
                if !self.enter_window(next_window) {
                    return None;
                }
                continue;
            }
            let a = self.a as usize;
            let s = self.window;
            let w = self.interior;
            if s >= 2 && self.interior + 1 < (1u64 << (s - 2)) {
                self.interior += 1;
            } else {
                self.interior = 0;
                self.a -= 1;
            }
            return Some(if s == 0 {
                // 0^a 1^b, no window
                BitVector::from_fn(self.n, |i| i >= a)
            } else {
                // 0^a, a leading 1, the interior bits of w (most significant
                // first), a closing 0, then 1^b
                BitVector::from_fn(self.n, |i| {
                    if i < a {
                        false
                    } else if i == a {
                        true
                    } else if i < a + s - 1 {
                        (w >> (s - 2 - (i - a))) & 1 == 1
                    } else { i != a + s - 1 }
                })
            });
        }
    }
}

/// True iff every input channel can influence every output channel through
/// the comparator graph, computed by propagating per-input influence sets
/// layer by layer. Necessary for sorting once `n >= 2`.
pub fn check_reachability(network: &Network) -> bool {
    let n = network.n();
    assert!(n <= MAX_WIDTH, "reachability supports up to {MAX_WIDTH} channels");
    if n <= 1 {
        return true;
    }
    let full = if n == 64 { !0u64 } else { (1u64 << n) - 1 };
    let mut influence: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
    for layer in network.layers() {
        for c in layer.comparators() {
            let gate_mask = (1u64 << c.low()) | (1u64 << c.high());
            for row in influence.iter_mut() {
                if *row & gate_mask != 0 {
                    *row |= gate_mask;
                }
            }
        }
    }
    influence.iter().all(|&row| row == full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Comparator, Layer};

    fn net(n: usize, layers: &[&[(usize, usize)]]) -> Network {
        Network::new(
            n,
            layers
                .iter()
                .map(|l| Layer::new(l.iter().map(|&(a, b)| Comparator::new(a, b)).collect()))
                .collect(),
        )
    }

    #[test]
    fn two_input_comparator_sorts_all() {
        let verdict = verify_01(&net(2, &[&[(0, 1)]])).unwrap();
        assert_eq!(
            verdict,
            Verdict::SortsAll { inputs_checked: 4 }
        );
    }

    #[test]
    fn identity_network_counterexample_is_lexicographic_minimum() {
        let verdict = verify_01(&Network::empty(2)).unwrap();
        let witness = verdict.witness().unwrap();
        assert_eq!(witness.to_string(), "10");
        assert_eq!(verdict.inputs_checked(), 3);
    }

    #[test]
    fn trivial_widths_sort() {
        assert!(verify_01(&Network::empty(0)).unwrap().sorts_all());
        assert!(verify_01(&Network::empty(1)).unwrap().sorts_all());
    }

    #[test]
    fn above_limit_is_refused() {
        let options = VerifyOptions {
            exhaustive_limit: 4,
            threads: 1,
        };
        let err = verify_01_with(&Network::empty(5), &options).unwrap_err();
        assert!(matches!(err, VerifyError::AboveExhaustiveLimit { n: 5, limit: 4 }));
    }

    #[test]
    fn invalid_network_is_refused() {
        let err = verify_01(&net(3, &[&[]])).unwrap_err();
        assert!(matches!(err, VerifyError::Invalid(_)));
    }

    #[test]
    fn output_set_of_two_input_comparator() {
        let set = output_set(&net(2, &[&[(0, 1)]])).unwrap();
        let strings: Vec<String> = set.iter().map(|v| v.to_string()).collect();
        assert_eq!(strings, ["00", "01", "11"]);
    }

    #[test]
    fn four_input_poset_output_set_matches_published_vectors() {
        let poset = net(4, &[&[(0, 1), (2, 3)], &[(0, 2), (1, 3)]]);
        let set = output_set(&poset).unwrap();
        let strings: Vec<String> = set.iter().map(|v| v.to_string()).collect();
        assert_eq!(strings, ["0000", "0001", "0011", "0101", "0111", "1111"]);
    }

    #[test]
    fn find_counterexample_identity_two_channels() {
        let found = find_counterexample(&Network::empty(2), &InputFamily::AllBinary);
        assert_eq!(found.unwrap().to_string(), "10");
    }

    #[test]
    fn find_counterexample_absent_for_sorter() {
        let sorter = net(2, &[&[(0, 1)]]);
        assert_eq!(find_counterexample(&sorter, &InputFamily::AllBinary), None);
    }

    #[test]
    fn family_order_is_fewest_unsorted_bits_then_lexicographic() {
        let all: Vec<BitVector> = family_vectors(3, &InputFamily::AllBinary).collect();
        let strings: Vec<String> = all.iter().map(|v| v.to_string()).collect();
        // window 0 (sorted), then window 2, then window 3
        assert_eq!(
            strings,
            ["000", "001", "011", "111", "010", "101", "100", "110"]
        );
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn all_binary_family_covers_everything_once() {
        for n in 0..=6usize {
            let mut seen: Vec<u64> = family_vectors(n, &InputFamily::AllBinary)
                .map(|v| v.to_index())
                .collect();
            assert_eq!(seen.len(), 1 << n, "n={n}");
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 1 << n, "n={n}");
        }
    }

    #[test]
    fn windowed_family_with_full_window_is_exactly_the_unsorted_set() {
        for n in 2..=6usize {
            let windowed: BTreeSet<BitVector> =
                family_vectors(n, &InputFamily::Windowed { max_window: n }).collect();
            let unsorted: BTreeSet<BitVector> = (0..1u64 << n)
                .map(|i| BitVector::from_index(n, i))
                .filter(|v| !v.is_sorted())
                .collect();
            assert_eq!(windowed, unsorted, "n={n}");
        }
    }

    #[test]
    fn windowed_two_family_is_the_single_exchange_vectors() {
        let family: Vec<String> = family_vectors(5, &InputFamily::Windowed { max_window: 2 })
            .map(|v| v.to_string())
            .collect();
        assert_eq!(family, ["00010", "00101", "01011", "10111"]);
    }

    #[test]
    fn explicit_family_is_sorted_and_deduplicated() {
        let family = InputFamily::Explicit(vec![
            "110".parse().unwrap(),
            "010".parse().unwrap(),
            "110".parse().unwrap(),
        ]);
        let strings: Vec<String> = family_vectors(3, &family).map(|v| v.to_string()).collect();
        assert_eq!(strings, ["010", "110"]);
    }

    #[test]
    fn reachability_examples() {
        assert!(!check_reachability(&Network::empty(2)));
        // full bubble sorter on 3 channels reaches everywhere
        assert!(check_reachability(&net(
            3,
            &[&[(0, 1)], &[(1, 2)], &[(0, 1)]]
        )));
        // a single layer on 4 channels cannot connect the two pairs
        assert!(!check_reachability(&net(4, &[&[(0, 1), (2, 3)]])));
    }

    #[test]
    fn verdict_serialization() {
        let v = Verdict::SortsAll {
            inputs_checked: 16,
        };
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"status":"sorts-all","inputs_checked":16}"#
        );
        let v = Verdict::Counterexample {
            witness: "10".parse().unwrap(),
            inputs_checked: 3,
        };
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"status":"counterexample","witness":"10","inputs_checked":3}"#
        );
    }

    #[test]
    fn multithreaded_witness_is_deterministic() {
        // depth-1 network on 8 channels: plenty of counterexamples; all
        // thread counts must report the same lexicographic minimum.
        let network = net(8, &[&[(0, 1), (2, 3), (4, 5), (6, 7)]]);
        let mut witnesses = Vec::new();
        for threads in [1, 2, 3, 8] {
            let options = VerifyOptions {
                exhaustive_limit: 26,
                threads,
            };
            let verdict = verify_01_with(&network, &options).unwrap();
            witnesses.push(*verdict.witness().unwrap());
        }
        witnesses.dedup();
        assert_eq!(witnesses.len(), 1);
    }
}
