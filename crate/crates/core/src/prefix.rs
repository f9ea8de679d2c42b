//! Hand-crafted first layers handed to the encoder: partial-order gadgets on
//! blocks of 2, 4 or 8 channels, the maximal pairing layer, and the opening
//! layers of the published fixture networks.
//!
//! Prefixes are ordinary [`Network`] values; the encoder pins them with unit
//! clauses.

use thiserror::Error;

use crate::generators::known_network;
use crate::network::{Comparator, Layer, Network};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefixError {
    #[error("unsupported block size {0}; expected 2, 4 or 8")]
    BadBlockSize(usize),
    #[error("block at channel {start} of size {size} does not fit in {n} channels")]
    BlockOutOfRange { start: usize, size: usize, n: usize },
    #[error("blocks at channels {first} and {second} overlap")]
    BlocksOverlap { first: usize, second: usize },
    #[error("unknown prefix `{0}`; available: fig2-3layer, fig3-4layer")]
    UnknownFigure(String),
}

/// Gadget layers for one block, with channel offsets relative to its start.
fn block_layers(size: usize) -> Result<&'static [&'static [(usize, usize)]], PrefixError> {
    match size {
        2 => Ok(&[&[(0, 1)]]),
        4 => Ok(&[&[(0, 1), (2, 3)], &[(0, 2), (1, 3)]]),
        8 => Ok(&[
            &[(0, 1), (2, 3), (4, 5), (6, 7)],
            &[(0, 2), (1, 3), (4, 6), (5, 7)],
            &[(0, 4), (1, 5), (2, 6), (3, 7)],
        ]),
        other => Err(PrefixError::BadBlockSize(other)),
    }
}

/// Places one partial-order gadget per starting channel, all blocks sharing
/// layers. Block outputs have a strongly restricted value set (6 vectors for
/// size 4, 20 for size 8), which shrinks the search space fed to the solver.
pub fn poset_prefix(block_size: usize, n: usize, placements: &[usize]) -> Result<Network, PrefixError> {
    let gadget = block_layers(block_size)?;
    let mut sorted = placements.to_vec();
    sorted.sort_unstable();
    for window in sorted.windows(2) {
        if window[0] + block_size > window[1] {
            return Err(PrefixError::BlocksOverlap {
                first: window[0],
                second: window[1],
            });
        }
    }
    for &start in &sorted {
        if start + block_size > n {
            return Err(PrefixError::BlockOutOfRange {
                start,
                size: block_size,
                n,
            });
        }
    }
    let layers = gadget
        .iter()
        .map(|layer| {
            Layer::new(
                sorted
                    .iter()
                    .flat_map(|&start| {
                        layer
                            .iter()
                            .map(move |&(a, b)| Comparator::new(start + a, start + b))
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(Network::new(n, layers))
}

/// The pairing layer `(0,1)(2,3)...`: `floor(n/2)` comparators, maximal (at
/// most one channel left untouched). Fixing any maximal first layer loses no
/// depth-optimal network, so synthesis may always start from this one.
pub fn canonical_first_layer(n: usize) -> Layer {
    Layer::new(
        (0..n / 2)
            .map(|k| Comparator::new(2 * k, 2 * k + 1))
            .collect(),
    )
}

/// The opening layers of the published fixture networks, bit-exact:
/// `fig2-3layer` is layers 1-3 of the 17-channel network, `fig3-4layer`
/// layers 1-4 of the 20-channel network.
pub fn figure_prefix(name: &str) -> Result<Network, PrefixError> {
    match name {
        "fig2-3layer" => Ok(known_network("paper17d10").expect("fixture").truncated(3)),
        "fig3-4layer" => Ok(known_network("paper20d11").expect("fixture").truncated(4)),
        other => Err(PrefixError::UnknownFigure(other.to_string())),
    }
}
