//! Baseline constructions and published fixture networks.

use thiserror::Error;

use crate::network::{Comparator, Layer, Network};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown network `{0}`; available: paper17d10, paper20d11, paper19d11")]
pub struct UnknownNetwork(pub String);

/// Classic odd-even mergesort: recursive ceil/floor split, odd-even merge.
/// For `n = 2^k` the depth is `k(k+1)/2`.
pub fn batcher_oddeven_sort(n: usize) -> Network {
    let channels: Vec<usize> = (0..n).collect();
    let layers = sort_rec(&channels)
        .into_iter()
        .filter(|l| !l.is_empty())
        .map(Layer::new)
        .collect();
    Network::new(n, layers)
}

fn sort_rec(channels: &[usize]) -> Vec<Vec<Comparator>> {
    if channels.len() <= 1 {
        return Vec::new();
    }
    let mid = channels.len().div_ceil(2);
    let top = sort_rec(&channels[..mid]);
    let bottom = sort_rec(&channels[mid..]);
    let mut layers = zip_parallel(top, bottom);
    layers.extend(merge_rec(&channels[..mid], &channels[mid..]));
    layers
}

/// Odd-even merge of two sorted runs living on the channel lists `a` and `b`:
/// merge the even-position elements and the odd-position elements of both
/// runs in parallel, then compare-exchange across consecutive final ranks.
fn merge_rec(a: &[usize], b: &[usize]) -> Vec<Vec<Comparator>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len() == 1 && b.len() == 1 {
        return vec![vec![Comparator::new(a[0], b[0])]];
    }
    let (a_even, a_odd) = split_even_odd(a);
    let (b_even, b_odd) = split_even_odd(b);
    let evens = merge_rec(&a_even, &b_even);
    let odds = merge_rec(&a_odd, &b_odd);
    let mut layers = zip_parallel(evens, odds);
    let merged_evens: Vec<usize> = a_even.iter().chain(&b_even).copied().collect();
    let merged_odds: Vec<usize> = a_odd.iter().chain(&b_odd).copied().collect();
    let mut fixup = Vec::new();
    let mut i = 1;
    while i < merged_evens.len() && i - 1 < merged_odds.len() {
        fixup.push(Comparator::new(merged_odds[i - 1], merged_evens[i]));
        i += 1;
    }
    if !fixup.is_empty() {
        layers.push(fixup);
    }
    layers
}

fn split_even_odd(channels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let even = channels.iter().step_by(2).copied().collect();
    let odd = channels.iter().skip(1).step_by(2).copied().collect();
    (even, odd)
}

/// Layerwise union of two sub-networks on disjoint channels.
fn zip_parallel(x: Vec<Vec<Comparator>>, y: Vec<Vec<Comparator>>) -> Vec<Vec<Comparator>> {
    let mut out = Vec::with_capacity(x.len().max(y.len()));
    let mut xi = x.into_iter();
    let mut yi = y.into_iter();
    loop {
        match (xi.next(), yi.next()) {
            (None, None) => return out,
            (xs, ys) => {
                let mut layer = xs.unwrap_or_default();
                layer.extend(ys.unwrap_or_default());
                out.push(layer);
            }
        }
    }
}

/// 17 channels, 10 layers, as published (1-indexed; the loader shifts down).
const PAPER17_D10: [&[(usize, usize)]; 10] = [
    &[(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16)],
    &[(1, 3), (2, 4), (5, 7), (6, 8), (9, 11), (10, 12), (13, 15), (14, 16)],
    &[(1, 5), (2, 6), (3, 7), (4, 8), (9, 13), (10, 14), (11, 15), (12, 16)],
    &[(1, 9), (2, 3), (4, 16), (5, 11), (6, 12), (7, 15), (10, 13), (14, 17)],
    &[(1, 16), (2, 10), (3, 13), (4, 17), (6, 7), (8, 9), (11, 14), (12, 15)],
    &[(2, 8), (3, 5), (4, 11), (6, 10), (7, 12), (9, 15), (13, 14), (16, 17)],
    &[(2, 15), (4, 6), (5, 8), (7, 13), (9, 14), (10, 11), (12, 16)],
    &[(2, 4), (3, 5), (6, 7), (8, 10), (9, 12), (11, 13), (14, 16), (15, 17)],
    &[(2, 3), (4, 5), (6, 8), (7, 10), (9, 11), (12, 13), (14, 15), (16, 17)],
    &[(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16)],
];

/// 20 channels, 11 layers, as published (1-indexed).
const PAPER20_D11: [&[(usize, usize)]; 11] = [
    &[(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16), (17, 18), (19, 20)],
    &[(1, 3), (2, 4), (5, 7), (6, 8), (9, 11), (10, 12), (13, 15), (14, 16), (17, 19), (18, 20)],
    &[(1, 5), (2, 6), (3, 7), (4, 8), (10, 11), (13, 17), (14, 18), (15, 19), (16, 20)],
    &[(1, 13), (2, 14), (3, 15), (4, 16), (5, 17), (6, 18), (7, 19), (8, 20)],
    &[(1, 18), (2, 3), (4, 9), (5, 15), (6, 11), (7, 10), (8, 14), (12, 17), (16, 19)],
    &[(1, 20), (2, 19), (3, 4), (5, 13), (6, 12), (7, 8), (9, 10), (11, 15), (14, 18), (16, 17)],
    &[(2, 3), (4, 7), (5, 20), (6, 13), (8, 11), (9, 12), (10, 14), (15, 16), (17, 19)],
    &[(1, 2), (3, 6), (4, 5), (7, 13), (8, 9), (10, 15), (11, 12), (14, 17), (16, 18), (19, 20)],
    &[(2, 4), (3, 19), (5, 8), (6, 7), (9, 11), (10, 13), (12, 16), (14, 15), (17, 18)],
    &[(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 13), (12, 14), (15, 16), (17, 19), (18, 20)],
    &[(4, 5), (6, 7), (8, 9), (10, 11), (12, 13), (14, 15), (16, 17), (18, 19)],
];

fn from_one_indexed(n: usize, layers: &[&[(usize, usize)]]) -> Network {
    Network::new(
        n,
        layers
            .iter()
            .map(|l| {
                Layer::new(
                    l.iter()
                        .map(|&(a, b)| Comparator::new(a - 1, b - 1))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Published fixture networks.
///
/// `paper17d10` and `paper20d11` are transcriptions of the published figures;
/// `paper19d11` is derived by removing one channel from the 20-channel
/// network (the channel whose removal leaves the fewest comparators, lowest
/// index on ties), which preserves sorting and never increases depth.
pub fn known_network(name: &str) -> Result<Network, UnknownNetwork> {
    match name {
        "paper17d10" => Ok(from_one_indexed(17, &PAPER17_D10)),
        "paper20d11" => Ok(from_one_indexed(20, &PAPER20_D11)),
        "paper19d11" => {
            let base = from_one_indexed(20, &PAPER20_D11);
            let best = (0..base.n())
                .map(|c| base.remove_channel(c).expect("channel in range"))
                .enumerate()
                .min_by_key(|(c, candidate)| (candidate.size(), *c))
                .map(|(_, candidate)| candidate)
                .expect("non-empty candidate set");
            Ok(best)
        }
        other => Err(UnknownNetwork(other.to_string())),
    }
}

pub fn known_network_names() -> &'static [&'static str] {
    &["paper17d10", "paper20d11", "paper19d11"]
}
