//! Comparator-network data model: comparators, layers, networks and the
//! bit vectors they act on.
//!
//! All types are immutable after construction and cheap to clone; evaluation
//! is pure, so values can be shared freely across threads.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Widest bit vector we can pack into a machine word. Networks themselves may
/// be wider, but evaluation and exhaustive checking are limited to this.
pub const MAX_WIDTH: usize = 64;

/// A compare-exchange gate: the minimum of the two channel values is routed
/// to `low`, the maximum to `high`.
///
/// Comparators are always stored normalized (`low < high`); min-down gates
/// have no extra expressive power for sorting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparator {
    low: usize,
    high: usize,
}

impl Comparator {
    /// Builds a comparator between two distinct channels, normalizing the
    /// orientation. Panics if `a == b`.
    pub fn new(a: usize, b: usize) -> Self {
        assert!(a != b, "comparator endpoints must be distinct (got {a}:{b})");
        Self {
            low: a.min(b),
            high: a.max(b),
        }
    }

    pub fn low(&self) -> usize {
        self.low
    }

    pub fn high(&self) -> usize {
        self.high
    }

    pub fn touches(&self, channel: usize) -> bool {
        self.low == channel || self.high == channel
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.low, self.high)
    }
}

/// One parallel step of a network: a set of comparators on pairwise-disjoint
/// channels, stored sorted by low channel (canonical form).
///
/// The constructor canonicalizes the order but does not reject duplicate
/// channel use; [`Network::validate`] diagnoses that with a precise location.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layer {
    comparators: Vec<Comparator>,
}

impl Layer {
    pub fn new(mut comparators: Vec<Comparator>) -> Self {
        comparators.sort_unstable();
        Self { comparators }
    }

    pub fn comparators(&self) -> &[Comparator] {
        &self.comparators
    }

    pub fn len(&self) -> usize {
        self.comparators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparators.is_empty()
    }

    pub fn touches(&self, channel: usize) -> bool {
        self.comparators.iter().any(|c| c.touches(channel))
    }

    /// One compare-exchange step over word-packed channel values (bit `i` of
    /// `bits` is channel `i`).
    fn apply_to_bits(&self, mut bits: u64) -> u64 {
        for c in &self.comparators {
            let a = (bits >> c.low) & 1;
            let b = (bits >> c.high) & 1;
            bits = (bits & !((1 << c.low) | (1 << c.high)))
                | ((a & b) << c.low)
                | ((a | b) << c.high);
        }
        bits
    }

    /// The channel paired with `channel` in this layer, if any.
    pub fn partner(&self, channel: usize) -> Option<usize> {
        self.comparators.iter().find_map(|c| {
            if c.low == channel {
                Some(c.high)
            } else if c.high == channel {
                Some(c.low)
            } else {
                None
            }
        })
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.comparators.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A structural invariant violation, reported with its location.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("layer {layer} is empty")]
    EmptyLayer { layer: usize },
    #[error("channel {channel} out of range for {n} channels in layer {layer}")]
    ChannelOutOfRange {
        layer: usize,
        channel: usize,
        n: usize,
    },
    #[error("channel {channel} used twice in layer {layer}")]
    ChannelReused { layer: usize, channel: usize },
}

/// Error for operations addressing a channel that does not exist.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("channel {channel} out of range for {n} channels")]
pub struct ChannelOutOfRange {
    pub channel: usize,
    pub n: usize,
}

/// A depth-ordered comparator circuit on `n` channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Network {
    n: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(n: usize, layers: Vec<Layer>) -> Self {
        Self { n, layers }
    }

    /// The identity network: `n` wires, no comparators.
    pub fn empty(n: usize) -> Self {
        Self { n, layers: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of layers (parallel steps).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Total comparator count.
    pub fn size(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn push_layer(&mut self, layer: Layer) {
        self.layers.push(layer);
    }

    /// A copy of the first `depth` layers, e.g. for use as a synthesis prefix.
    pub fn truncated(&self, depth: usize) -> Network {
        Network::new(self.n, self.layers[..depth.min(self.layers.len())].to_vec())
    }

    /// Checks every structural invariant and reports the first violation:
    /// layers must be non-empty, channels in range, and no channel may be
    /// touched twice within a layer.
    pub fn validate(&self) -> Result<(), ValidationError> {
        for (t, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(ValidationError::EmptyLayer { layer: t });
            }
            let mut used = vec![false; self.n];
            for c in layer.comparators() {
                for channel in [c.low, c.high] {
                    if channel >= self.n {
                        return Err(ValidationError::ChannelOutOfRange {
                            layer: t,
                            channel,
                            n: self.n,
                        });
                    }
                    if used[channel] {
                        return Err(ValidationError::ChannelReused { layer: t, channel });
                    }
                    used[channel] = true;
                }
            }
        }
        Ok(())
    }

    /// Runs the network on a binary input, layer by layer.
    ///
    /// Panics if the input width does not match the channel count.
    pub fn evaluate(&self, input: &BitVector) -> BitVector {
        assert_eq!(
            input.width(),
            self.n,
            "input width {} does not match channel count {}",
            input.width(),
            self.n
        );
        let mut bits = input.bits;
        for layer in &self.layers {
            bits = layer.apply_to_bits(bits);
        }
        BitVector {
            width: self.n,
            bits,
        }
    }

    /// The value vector at every layer boundary: element 0 is the input,
    /// element `depth()` the output.
    pub fn evaluate_trace(&self, input: &BitVector) -> Vec<BitVector> {
        assert_eq!(input.width(), self.n);
        let mut trace = Vec::with_capacity(self.depth() + 1);
        trace.push(*input);
        let mut bits = input.bits;
        for layer in &self.layers {
            bits = layer.apply_to_bits(bits);
            trace.push(BitVector {
                width: self.n,
                bits,
            });
        }
        trace
    }

    /// Applies all layers to a transposed batch: `words[i]` holds, one bit
    /// per batched input, the current value on channel `i`. A comparator is
    /// two word ops (AND/OR), so 64 inputs advance per gate.
    pub fn apply_to_words(&self, words: &mut [u64]) {
        debug_assert_eq!(words.len(), self.n);
        for layer in &self.layers {
            for c in layer.comparators() {
                let lo = words[c.low] & words[c.high];
                let hi = words[c.low] | words[c.high];
                words[c.low] = lo;
                words[c.high] = hi;
            }
        }
    }

    /// Evaluates many inputs at once, bit-parallel. Order is preserved and
    /// the result is pointwise identical to [`Network::evaluate`].
    ///
    /// Panics if any input width does not match the channel count.
    pub fn evaluate_batch(&self, inputs: &[BitVector]) -> Vec<BitVector> {
        let mut out = Vec::with_capacity(inputs.len());
        let mut words = vec![0u64; self.n];
        for chunk in inputs.chunks(64) {
            for w in words.iter_mut() {
                *w = 0;
            }
            for (b, input) in chunk.iter().enumerate() {
                assert_eq!(
                    input.width(),
                    self.n,
                    "input width {} does not match channel count {}",
                    input.width(),
                    self.n
                );
                for (i, w) in words.iter_mut().enumerate() {
                    *w |= ((input.bits >> i) & 1) << b;
                }
            }
            self.apply_to_words(&mut words);
            for b in 0..chunk.len() {
                let mut bits = 0u64;
                for (i, w) in words.iter().enumerate() {
                    bits |= ((w >> b) & 1) << i;
                }
                out.push(BitVector {
                    width: self.n,
                    bits,
                });
            }
        }
        out
    }

    /// Removes one channel by pinning its input to the maximum value and
    /// following that value through the circuit: every gate it meets is a
    /// pass-through for the remaining values and is dropped, the surviving
    /// gates are relabeled onto `n - 1` wires, and min-to-high gates produced
    /// by the relabeling are rewritten into standard orientation (which
    /// preserves the sorting property, since it only permutes inputs).
    ///
    /// If the receiver sorts, the result sorts; depth never increases.
    pub fn remove_channel(&self, channel: usize) -> Result<Network, ChannelOutOfRange> {
        if channel >= self.n {
            return Err(ChannelOutOfRange {
                channel,
                n: self.n,
            });
        }
        const MAXED: usize = usize::MAX;
        // carrier[p] = which input value stream is on physical channel p.
        let mut carrier: Vec<usize> = (0..self.n).collect();
        carrier[channel] = MAXED;
        // Generalized gates on stream ids: (u, v) routes the minimum to u.
        let mut gen_layers: Vec<Vec<(usize, usize)>> = Vec::with_capacity(self.depth());
        for layer in &self.layers {
            let mut glayer = Vec::new();
            for c in layer.comparators() {
                if carrier[c.low] == MAXED {
                    // The max exits on the high side; the displaced stream
                    // continues on the low wire.
                    carrier[c.low] = carrier[c.high];
                    carrier[c.high] = MAXED;
                } else if carrier[c.high] == MAXED {
                    // Max already on the high side: gate is a no-op.
                } else {
                    glayer.push((carrier[c.low], carrier[c.high]));
                }
            }
            gen_layers.push(glayer);
        }
        // Relabel streams by their final physical position so the reduced
        // network sorts onto wires 0..n-1 in order.
        let mut rank = vec![0usize; self.n];
        let mut next = 0;
        for p in 0..self.n {
            if carrier[p] != MAXED {
                rank[carrier[p]] = next;
                next += 1;
            }
        }
        for glayer in gen_layers.iter_mut() {
            for gate in glayer.iter_mut() {
                gate.0 = rank[gate.0];
                gate.1 = rank[gate.1];
            }
        }
        standardize(&mut gen_layers);
        let layers = gen_layers
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|g| Layer::new(g.into_iter().map(|(u, v)| Comparator::new(u, v)).collect()))
            .collect();
        Ok(Network::new(self.n - 1, layers))
    }

    /// Renders the canonical text form (see [`Network::from_str`]).
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// Rewrites min-to-high gates into standard form: take the first such gate in
/// circuit order, flip it, and swap its two wire labels in all later layers.
/// The first nonstandard position strictly increases, so this terminates in
/// at most `size` rounds.
fn standardize(layers: &mut [Vec<(usize, usize)>]) {
    loop {
        let mut found = None;
        'scan: for (t, layer) in layers.iter().enumerate() {
            for (k, &(u, v)) in layer.iter().enumerate() {
                if u > v {
                    found = Some((t, k, u, v));
                    break 'scan;
                }
            }
        }
        let Some((t, k, u, v)) = found else {
            return;
        };
        layers[t][k] = (v, u);
        for later in layers[t + 1..].iter_mut() {
            for gate in later.iter_mut() {
                gate.0 = swap_label(gate.0, u, v);
                gate.1 = swap_label(gate.1, u, v);
            }
        }
    }
}

fn swap_label(x: usize, u: usize, v: usize) -> usize {
    if x == u {
        v
    } else if x == v {
        u
    } else {
        x
    }
}

/// Text format errors, reported with 1-based line numbers.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

impl fmt::Display for Network {
    /// Text format: `n <count>` then one layer per line as comma-separated
    /// `low:high` pairs, 0-indexed. `#` starts a comment.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n {}", self.n)?;
        for layer in &self.layers {
            writeln!(f, "{layer}")?;
        }
        Ok(())
    }
}

impl FromStr for Network {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut n: Option<usize> = None;
        let mut layers = Vec::new();
        for (idx, raw) in s.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match n {
                None => {
                    let rest = line
                        .strip_prefix('n')
                        .ok_or_else(|| syntax(line_no, "expected header `n <count>`"))?;
                    let count: usize = rest
                        .trim()
                        .parse()
                        .map_err(|_| syntax(line_no, format!("invalid channel count `{}`", rest.trim())))?;
                    n = Some(count);
                }
                Some(width) => {
                    let mut comparators = Vec::new();
                    for token in line.split(',') {
                        let token = token.trim();
                        let (lo, hi) = token
                            .split_once(':')
                            .ok_or_else(|| syntax(line_no, format!("expected `low:high`, got `{token}`")))?;
                        let low: usize = lo
                            .trim()
                            .parse()
                            .map_err(|_| syntax(line_no, format!("invalid channel `{}`", lo.trim())))?;
                        let high: usize = hi
                            .trim()
                            .parse()
                            .map_err(|_| syntax(line_no, format!("invalid channel `{}`", hi.trim())))?;
                        if low >= high {
                            return Err(syntax(
                                line_no,
                                format!("comparator {low}:{high} must have low < high"),
                            ));
                        }
                        if high >= width {
                            return Err(syntax(
                                line_no,
                                format!("channel {high} out of range for {width} channels"),
                            ));
                        }
                        comparators.push(Comparator::new(low, high));
                    }
                    layers.push(Layer::new(comparators));
                }
            }
        }
        let n = n.ok_or_else(|| syntax(1, "missing header `n <count>`"))?;
        let network = Network::new(n, layers);
        network.validate()?;
        Ok(network)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    n: usize,
    layers: Vec<Vec<[usize; 2]>>,
}

impl Serialize for Network {
    /// JSON mirror of the text format: `{"n": .., "layers": [[[low, high], ..], ..]}`.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        NetworkRepr {
            n: self.n,
            layers: self
                .layers
                .iter()
                .map(|l| l.comparators().iter().map(|c| [c.low, c.high]).collect())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = NetworkRepr::deserialize(deserializer)?;
        let mut layers = Vec::with_capacity(repr.layers.len());
        for layer in repr.layers {
            let mut comparators = Vec::with_capacity(layer.len());
            for [low, high] in layer {
                if low >= high {
                    return Err(D::Error::custom(format!(
                        "comparator [{low}, {high}] must have low < high"
                    )));
                }
                comparators.push(Comparator::new(low, high));
            }
            layers.push(Layer::new(comparators));
        }
        let network = Network::new(repr.n, layers);
        network.validate().map_err(D::Error::custom)?;
        Ok(network)
    }
}

/// An `n`-bit 0/1 word; channel 0 is the topmost wire and comes first in the
/// string form. Packed into a `u64`, so the width is limited to [`MAX_WIDTH`].
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: usize,
    bits: u64,
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        assert!(width <= MAX_WIDTH, "width {width} exceeds {MAX_WIDTH}");
        Self { width, bits: 0 }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn from_fn(width: usize, f: impl Fn(usize) -> bool) -> Self {
        let mut v = Self::zeros(width);
        for i in 0..width {
            v.set(i, f(i));
        }
        v
    }

    /// The `index`-th vector in lexicographic order (channel 0 is the most
    /// significant position).
    pub fn from_index(width: usize, index: u64) -> Self {
        assert!(width <= MAX_WIDTH);
        debug_assert!(width == 64 || index < (1u64 << width));
        Self::from_fn(width, |i| (index >> (width - 1 - i)) & 1 == 1)
    }

    /// Position in lexicographic order; inverse of [`BitVector::from_index`].
    pub fn to_index(&self) -> u64 {
        let mut index = 0u64;
        for i in 0..self.width {
            index = (index << 1) | ((self.bits >> i) & 1);
        }
        index
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, channel: usize) -> bool {
        assert!(channel < self.width);
        (self.bits >> channel) & 1 == 1
    }

    pub fn set(&mut self, channel: usize, value: bool) {
        assert!(channel < self.width);
        if value {
            self.bits |= 1 << channel;
        } else {
            self.bits &= !(1 << channel);
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(|i| self.get(i))
    }

    /// True iff the bits are non-decreasing from channel 0 to the last.
    pub fn is_sorted(&self) -> bool {
        if self.width < 2 {
            return true;
        }
        // A 1 followed by a 0 on the next channel is the only local violation.
        let adjacent_violation = self.bits & !(self.bits >> 1);
        adjacent_violation & ((1u64 << (self.width - 1)) - 1) == 0
    }

    /// Size of the unsorted window: the vector is `0^a y 1^b` with `a`, `b`
    /// maximal, and this returns `|y|` (0 for sorted vectors).
    pub fn unsorted_window(&self) -> usize {
        let mut a = 0;
        while a < self.width && !self.get(a) {
            a += 1;
        }
        let mut b = 0;
        while b < self.width - a && self.get(self.width - 1 - b) {
            b += 1;
        }
        self.width - a - b
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > MAX_WIDTH {
            return Err(syntax(1, format!("bit string longer than {MAX_WIDTH}")));
        }
        let mut v = BitVector::zeros(s.len());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => v.set(i, true),
                _ => return Err(syntax(1, format!("invalid bit `{ch}`"))),
            }
        }
        Ok(v)
    }
}

impl PartialOrd for BitVector {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BitVector {
    /// Width first, then lexicographic (channel 0 most significant).
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.width, self.to_index()).cmp(&(other.width, other.to_index()))
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}
