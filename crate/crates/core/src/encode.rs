//! CNF encoding of "a depth-`d` comparator network on `n` channels, extending
//! a fixed prefix, that sorts a given input set and lets every input reach
//! every output" — plus the decoding of satisfying assignments back into
//! networks and DIMACS serialization.
//!
//! Variable families:
//! * `g[t][i][j]` — comparator `(i, j)` present in layer `t`
//! * `u[t][i]`    — channel `i` touched by some comparator in layer `t`
//! * `v[x][t][i]` — value on channel `i` after `t` layers under input `x`
//! * `r[t][i][j]` — input `i` influences channel `j` after `t` layers
//!
//! Value variables dominate the size at `|inputs| * (d + 1) * n`, the
//! influence relation costs `(d + 1) * n^2`.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::Not;

use thiserror::Error;

use crate::network::{BitVector, Comparator, Layer, Network, ValidationError};

/// 1-based variable index, as in DIMACS.
pub type Var = u32;

/// A signed literal in DIMACS convention: positive integers are positive
/// literals, negation flips the sign. Never zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn positive(var: Var) -> Lit {
        debug_assert!(var > 0);
        Lit(var as i32)
    }

    pub fn negative(var: Var) -> Lit {
        debug_assert!(var > 0);
        Lit(-(var as i32))
    }

    pub fn with_sign(var: Var, value: bool) -> Lit {
        if value {
            Lit::positive(var)
        } else {
            Lit::negative(var)
        }
    }

    pub fn from_dimacs(encoded: i32) -> Lit {
        assert!(encoded != 0, "literal 0 is the clause terminator");
        Lit(encoded)
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        self.0.unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// True under an assignment of its variable.
    pub fn satisfied_by(self, value: bool) -> bool {
        value == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A clause database: variable count plus a list of clauses. Clauses are
/// immutable once added and never empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: Var,
    clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        self.num_vars
    }

    /// Allocates `count` consecutive variables and returns the first.
    pub fn new_vars(&mut self, count: u32) -> Var {
        let first = self.num_vars + 1;
        self.num_vars += count;
        first
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        assert!(!lits.is_empty(), "empty clause");
        debug_assert!(lits.iter().all(|l| l.var() <= self.num_vars));
        self.clauses.push(lits.to_vec());
    }

    pub fn num_vars(&self) -> Var {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    /// Index of the first clause the assignment falsifies, if any.
    pub fn first_falsified(&self, assign: impl Fn(Var) -> bool) -> Option<usize> {
        self.clauses
            .iter()
            .position(|clause| !clause.iter().any(|l| l.satisfied_by(assign(l.var()))))
    }
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("prefix has {prefix_n} channels, instance has {n}")]
    PrefixWidthMismatch { prefix_n: usize, n: usize },
    #[error("prefix depth {prefix_depth} exceeds instance depth {d}")]
    PrefixTooDeep { prefix_depth: usize, d: usize },
    #[error("invalid prefix: {0}")]
    InvalidPrefix(#[from] ValidationError),
    #[error("input width {width} does not match {n} channels")]
    InputWidthMismatch { width: usize, n: usize },
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("model places two comparators on channel {channel} in layer {layer}; encoding bug")]
    ConflictingModel { layer: usize, channel: usize },
}

/// Bijective map between the semantic variables of one instance and solver
/// variables. Comparator and used-channel variables exist for every layer
/// (prefix layers are then pinned by unit clauses); value variables are
/// allocated per registered input; influence variables on demand.
#[derive(Debug, Clone)]
pub struct VarMap {
    n: usize,
    d: usize,
    prefix_depth: usize,
    pairs: u32,
    g_base: Var,
    u_base: Var,
    reach_base: Option<Var>,
    inputs: Vec<BitVector>,
    slots: HashMap<BitVector, usize>,
    value_bases: Vec<Var>,
}

impl VarMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn prefix_depth(&self) -> usize {
        self.prefix_depth
    }

    fn pair_index(&self, i: usize, j: usize) -> u32 {
        debug_assert!(i < j && j < self.n);
        // row-major upper triangle: (0,1), (0,2), .., (0,n-1), (1,2), ..
        (i * (2 * self.n - i - 1) / 2 + (j - i - 1)) as u32
    }

    /// Comparator variable for layer `t` and channel pair `{i, j}`.
    pub fn comparator_var(&self, t: usize, i: usize, j: usize) -> Var {
        debug_assert!(t < self.d);
        let (i, j) = (i.min(j), i.max(j));
        self.g_base + t as u32 * self.pairs + self.pair_index(i, j)
    }

    /// Used-channel variable for layer `t`, channel `i`.
    pub fn used_var(&self, t: usize, i: usize) -> Var {
        debug_assert!(t < self.d && i < self.n);
        self.u_base + (t * self.n + i) as u32
    }

    /// Value variable for registered input `slot` at layer boundary `t`,
    /// channel `i`.
    pub fn value_var(&self, slot: usize, t: usize, i: usize) -> Var {
        debug_assert!(t <= self.d && i < self.n);
        self.value_bases[slot] + (t * self.n + i) as u32
    }

    /// Influence variable: input `i` reaches channel `j` after `t` layers.
    /// Present only once reachability clauses were added.
    pub fn reach_var(&self, t: usize, i: usize, j: usize) -> Option<Var> {
        let base = self.reach_base?;
        debug_assert!(t <= self.d && i < self.n && j < self.n);
        Some(base + (t * self.n * self.n + i * self.n + j) as u32)
    }

    pub fn has_reachability(&self) -> bool {
        self.reach_base.is_some()
    }

    /// Inputs in registration order.
    pub fn inputs(&self) -> &[BitVector] {
        &self.inputs
    }

    pub fn input_slot(&self, x: &BitVector) -> Option<usize> {
        self.slots.get(x).copied()
    }

    pub fn value_var_count(&self) -> u32 {
        (self.inputs.len() * (self.d + 1) * self.n) as u32
    }

    pub fn reach_var_count(&self) -> u32 {
        if self.reach_base.is_some() {
            ((self.d + 1) * self.n * self.n) as u32
        } else {
            0
        }
    }

    /// All comparator variables with their meaning, in variable order —
    /// the DIMACS legend.
    pub fn comparator_legend(&self) -> impl Iterator<Item = (usize, usize, usize, Var)> + '_ {
        (0..self.d).flat_map(move |t| {
            (0..self.n).flat_map(move |i| {
                (i + 1..self.n).map(move |j| (t, i, j, self.comparator_var(t, i, j)))
            })
        })
    }
}

/// Builds the structural skeleton: at most one comparator per channel per
/// layer, used-channel definitions, and unit clauses pinning every prefix
/// layer (present gates true, all other pairs in those layers false).
pub fn encode_structure(
    n: usize,
    d: usize,
    prefix: &Network,
) -> Result<(CnfFormula, VarMap), EncodeError> {
    if prefix.n() != n {
        return Err(EncodeError::PrefixWidthMismatch {
            prefix_n: prefix.n(),
            n,
        });
    }
    if prefix.depth() > d {
        return Err(EncodeError::PrefixTooDeep {
            prefix_depth: prefix.depth(),
            d,
        });
    }
    prefix.validate()?;

    let pairs = (n * n.saturating_sub(1) / 2) as u32;
    let mut formula = CnfFormula::new();
    let g_base = formula.new_vars(d as u32 * pairs);
    let u_base = formula.new_vars((d * n) as u32);
    let map = VarMap {
        n,
        d,
        prefix_depth: prefix.depth(),
        pairs,
        g_base,
        u_base,
        reach_base: None,
        inputs: Vec::new(),
        slots: HashMap::new(),
        value_bases: Vec::new(),
    };

    // (a) at most one comparator incident to each channel per layer
    for t in 0..d {
        for i in 0..n {
            let partners: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            for a in 0..partners.len() {
                for b in a + 1..partners.len() {
                    formula.add_clause(&[
                        Lit::negative(map.comparator_var(t, i, partners[a])),
                        Lit::negative(map.comparator_var(t, i, partners[b])),
                    ]);
                }
            }
        }
    }

    // (b) u[t][i] <-> some comparator touches channel i in layer t
    for t in 0..d {
        for i in 0..n {
            let mut definition = vec![Lit::negative(map.used_var(t, i))];
            for j in (0..n).filter(|&j| j != i) {
                let g = map.comparator_var(t, i, j);
                definition.push(Lit::positive(g));
                formula.add_clause(&[Lit::negative(g), Lit::positive(map.used_var(t, i))]);
            }
            // with no partners (n == 1) this degenerates to a unit forcing u false
            formula.add_clause(&definition);
        }
    }

    // (c) prefix layers pinned by unit clauses
    for (t, layer) in prefix.layers().iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let present = layer
                    .comparators()
                    .contains(&Comparator::new(i, j));
                formula.add_clause(&[Lit::with_sign(map.comparator_var(t, i, j), present)]);
            }
        }
    }

    Ok((formula, map))
}

/// Registers an input and constrains the network to sort it: the boundary-0
/// values are pinned to `x`, a present comparator routes min/max, an
/// untouched channel passes its value through, and the final boundary must be
/// non-decreasing. Registering the same input twice is a no-op.
pub fn add_sortedness(
    formula: &mut CnfFormula,
    map: &mut VarMap,
    x: &BitVector,
) -> Result<(), EncodeError> {
    if x.width() != map.n {
        return Err(EncodeError::InputWidthMismatch {
            width: x.width(),
            n: map.n,
        });
    }
    if map.slots.contains_key(x) {
        return Ok(());
    }
    let slot = map.inputs.len();
    let base = formula.new_vars(((map.d + 1) * map.n) as u32);
    map.inputs.push(*x);
    map.slots.insert(*x, slot);
    map.value_bases.push(base);

    let (n, d) = (map.n, map.d);
    for i in 0..n {
        formula.add_clause(&[Lit::with_sign(map.value_var(slot, 0, i), x.get(i))]);
    }
    for t in 0..d {
        for i in 0..n {
            for j in i + 1..n {
                let g = Lit::negative(map.comparator_var(t, i, j));
                let a = map.value_var(slot, t, i);
                let b = map.value_var(slot, t, j);
                let a_next = map.value_var(slot, t + 1, i);
                let b_next = map.value_var(slot, t + 1, j);
                // g -> (a' <-> a AND b)
                formula.add_clause(&[g, Lit::negative(a_next), Lit::positive(a)]);
                formula.add_clause(&[g, Lit::negative(a_next), Lit::positive(b)]);
                formula.add_clause(&[
                    g,
                    Lit::positive(a_next),
                    Lit::negative(a),
                    Lit::negative(b),
                ]);
                // g -> (b' <-> a OR b)
                formula.add_clause(&[g, Lit::positive(b_next), Lit::negative(a)]);
                formula.add_clause(&[g, Lit::positive(b_next), Lit::negative(b)]);
                formula.add_clause(&[
                    g,
                    Lit::negative(b_next),
                    Lit::positive(a),
                    Lit::positive(b),
                ]);
            }
        }
        for i in 0..n {
            let u = Lit::positive(map.used_var(t, i));
            let v = map.value_var(slot, t, i);
            let v_next = map.value_var(slot, t + 1, i);
            // NOT u -> (v' <-> v)
            formula.add_clause(&[u, Lit::negative(v_next), Lit::positive(v)]);
            formula.add_clause(&[u, Lit::positive(v_next), Lit::negative(v)]);
        }
    }
    for i in 0..n.saturating_sub(1) {
        formula.add_clause(&[
            Lit::negative(map.value_var(slot, d, i)),
            Lit::positive(map.value_var(slot, d, i + 1)),
        ]);
    }
    Ok(())
}

/// Adds the influence relation: boundary 0 is the identity, a layer extends
/// influence across its gates, and every input must reach every channel at
/// the final boundary. Necessary for sorting once `n >= 2`, and prunes the
/// structural search space even before any input is registered.
///
/// Adding it twice is a no-op.
pub fn add_reachability(formula: &mut CnfFormula, map: &mut VarMap) {
    if map.reach_base.is_some() {
        return;
    }
    let (n, d) = (map.n, map.d);
    let base = formula.new_vars(((d + 1) * n * n) as u32);
    map.reach_base = Some(base);
    let r = |map: &VarMap, t: usize, i: usize, j: usize| map.reach_var(t, i, j).expect("allocated");

    for i in 0..n {
        for j in 0..n {
            formula.add_clause(&[Lit::with_sign(r(map, 0, i, j), i == j)]);
        }
    }
    for t in 1..=d {
        for i in 0..n {
            for j in 0..n {
                let now = r(map, t, i, j);
                let before = r(map, t - 1, i, j);
                // influence is monotone
                formula.add_clause(&[Lit::negative(before), Lit::positive(now)]);
                // a gate (j, k) imports k's influence
                for k in (0..n).filter(|&k| k != j) {
                    formula.add_clause(&[
                        Lit::negative(map.comparator_var(t - 1, j, k)),
                        Lit::negative(r(map, t - 1, i, k)),
                        Lit::positive(now),
                    ]);
                }
                // conversely, new influence needs a gate on j ...
                formula.add_clause(&[
                    Lit::negative(now),
                    Lit::positive(before),
                    Lit::positive(map.used_var(t - 1, j)),
                ]);
                // ... and (with at most one gate per channel) that gate's
                // partner must have carried the influence
                for k in (0..n).filter(|&k| k != j) {
                    formula.add_clause(&[
                        Lit::negative(now),
                        Lit::positive(before),
                        Lit::negative(map.comparator_var(t - 1, j, k)),
                        Lit::positive(r(map, t - 1, i, k)),
                    ]);
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            formula.add_clause(&[Lit::positive(r(map, d, i, j))]);
        }
    }
}

/// A network extracted from a model. Empty layers are dropped (a depth-`d`
/// instance may be satisfied by a shallower network), so `effective_depth`
/// can be below the declared depth of the instance.
#[derive(Debug, Clone)]
pub struct DecodedNetwork {
    pub network: Network,
    pub declared_depth: usize,
    pub effective_depth: usize,
}

/// Reads the comparator variables out of a model. Fails only if the model
/// violates the at-most-one-per-channel constraint, which would be an
/// encoding bug.
pub fn decode_model(
    map: &VarMap,
    model: impl Fn(Var) -> bool,
) -> Result<DecodedNetwork, DecodeError> {
    let mut layers = Vec::new();
    for t in 0..map.d {
        let mut used = vec![false; map.n];
        let mut comparators = Vec::new();
        for i in 0..map.n {
            for j in i + 1..map.n {
                if model(map.comparator_var(t, i, j)) {
                    for channel in [i, j] {
                        if used[channel] {
                            return Err(DecodeError::ConflictingModel { layer: t, channel });
                        }
                        used[channel] = true;
                    }
                    comparators.push(Comparator::new(i, j));
                }
            }
        }
        if !comparators.is_empty() {
            layers.push(Layer::new(comparators));
        }
    }
    let network = Network::new(map.n, layers);
    debug_assert_eq!(network.validate(), Ok(()));
    Ok(DecodedNetwork {
        effective_depth: network.depth(),
        declared_depth: map.d,
        network,
    })
}

/// The assignment a concrete network induces on an instance's variables:
/// comparator and used-channel variables from the layers (layers beyond the
/// network's depth stay empty), value variables from evaluation traces, and
/// influence variables from the layer-by-layer influence recurrence.
///
/// Indexed by variable; slot 0 is unused.
pub fn induced_assignment(formula: &CnfFormula, map: &VarMap, network: &Network) -> Vec<bool> {
    assert_eq!(network.n(), map.n);
    assert!(network.depth() <= map.d);
    let mut values = vec![false; formula.num_vars() as usize + 1];
    let (n, d) = (map.n, map.d);

    for (t, layer) in network.layers().iter().enumerate() {
        for c in layer.comparators() {
            values[map.comparator_var(t, c.low(), c.high()) as usize] = true;
            values[map.used_var(t, c.low()) as usize] = true;
            values[map.used_var(t, c.high()) as usize] = true;
        }
    }

    for slot in 0..map.inputs.len() {
        let trace = network.evaluate_trace(&map.inputs[slot]);
        for t in 0..=d {
            let boundary = &trace[t.min(network.depth())];
            for i in 0..n {
                values[map.value_var(slot, t, i) as usize] = boundary.get(i);
            }
        }
    }

    if map.reach_base.is_some() {
        let mut influence: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| i == j).collect())
            .collect();
        for t in 0..=d {
            for (i, row) in influence.iter().enumerate() {
                for (j, &reached) in row.iter().enumerate() {
                    let var = map.reach_var(t, i, j).expect("allocated");
                    values[var as usize] = reached;
                }
            }
            if t < d {
                if let Some(layer) = network.layers().get(t) {
                    for row in influence.iter_mut() {
                        for c in layer.comparators() {
                            let reached = row[c.low()] || row[c.high()];
                            row[c.low()] = reached;
                            row[c.high()] = reached;
                        }
                    }
                }
            }
        }
    }
    values
}

/// Writes standard DIMACS CNF. When a map is supplied, `c g <t> <i> <j> <var>`
/// comment lines describe the comparator variables so external models stay
/// decodable.
pub fn emit_dimacs(
    formula: &CnfFormula,
    legend: Option<&VarMap>,
    sink: &mut impl Write,
) -> io::Result<()> {
    if let Some(map) = legend {
        for (t, i, j, var) in map.comparator_legend() {
            writeln!(sink, "c g {t} {i} {j} {var}")?;
        }
    }
    writeln!(sink, "p cnf {} {}", formula.num_vars(), formula.num_clauses())?;
    for clause in formula.clauses() {
        for lit in clause {
            write!(sink, "{lit} ")?;
        }
        writeln!(sink, "0")?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum DimacsParseError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn malformed(line: usize, message: impl Into<String>) -> DimacsParseError {
    DimacsParseError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses DIMACS CNF: `c` comments anywhere, one `p cnf <vars> <clauses>`
/// header, clauses as 0-terminated literal runs (line breaks irrelevant).
pub fn parse_dimacs(reader: impl BufRead) -> Result<CnfFormula, DimacsParseError> {
    let mut formula = CnfFormula::new();
    let mut declared_vars: Option<u32> = None;
    let mut clause: Vec<Lit> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if declared_vars.is_some() {
                return Err(malformed(line_no, "duplicate header"));
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 3 || fields[0] != "cnf" {
                return Err(malformed(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let vars: u32 = fields[1]
                .parse()
                .map_err(|_| malformed(line_no, "invalid variable count"))?;
            declared_vars = Some(vars);
            formula.new_vars(vars);
            continue;
        }
        let Some(declared) = declared_vars else {
            return Err(malformed(line_no, "clause before header"));
        };
        for token in line.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| malformed(line_no, format!("invalid literal `{token}`")))?;
            if value == 0 {
                if clause.is_empty() {
                    return Err(malformed(line_no, "empty clause"));
                }
                formula.add_clause(&clause);
                clause.clear();
            } else {
                if value.unsigned_abs() > declared as u64 {
                    return Err(malformed(
                        line_no,
                        format!("literal {value} exceeds declared {declared} variables"),
                    ));
                }
                clause.push(Lit::from_dimacs(value as i32));
            }
        }
    }
    if declared_vars.is_none() {
        return Err(malformed(1, "missing `p cnf` header"));
    }
    if !clause.is_empty() {
        return Err(malformed(0, "unterminated clause at end of input"));
    }
    Ok(formula)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;
    use crate::prefix::canonical_first_layer;

    fn all_models(formula: &CnfFormula) -> Vec<Vec<bool>> {
        let vars = formula.num_vars() as usize;
        assert!(vars <= 22, "brute force limited to 22 variables");
        let mut models = Vec::new();
        for bits in 0u64..(1 << vars) {
            let assign = |v: Var| (bits >> (v - 1)) & 1 == 1;
            if formula.first_falsified(assign).is_none() {
                let mut model = vec![false; vars + 1];
                for (v, slot) in model.iter_mut().enumerate().skip(1) {
                    *slot = assign(v as Var);
                }
                models.push(model);
            }
        }
        models
    }

    #[test]
    fn structure_n2_d1_has_one_comparator_variable() {
        let (formula, map) = encode_structure(2, 1, &Network::empty(2)).unwrap();
        assert_eq!(map.comparator_legend().count(), 1);
        assert_eq!(map.comparator_var(0, 0, 1), 1);
        // g, u0, u1
        assert_eq!(formula.num_vars(), 3);
    }

    #[test]
    fn structure_n3_d1_excludes_overlapping_gates() {
        let (formula, map) = encode_structure(3, 1, &Network::empty(3)).unwrap();
        let g01 = map.comparator_var(0, 0, 1);
        let g02 = map.comparator_var(0, 0, 2);
        let g12 = map.comparator_var(0, 1, 2);
        for (x, y) in [(g01, g02), (g01, g12), (g02, g12)] {
            let expected = vec![Lit::negative(x), Lit::negative(y)];
            let mirrored = vec![Lit::negative(y), Lit::negative(x)];
            assert!(
                formula
                    .clauses()
                    .iter()
                    .any(|c| *c == expected || *c == mirrored),
                "missing exclusion {x} {y}"
            );
        }
    }

    #[test]
    fn prefix_layers_are_pinned() {
        let prefix = Network::new(4, vec![canonical_first_layer(4)]);
        let (formula, map) = encode_structure(4, 3, &prefix).unwrap();
        let model_true: Vec<Var> = formula
            .clauses()
            .iter()
            .filter(|c| c.len() == 1 && c[0].is_positive())
            .map(|c| c[0].var())
            .collect();
        assert_eq!(
            model_true,
            vec![map.comparator_var(0, 0, 1), map.comparator_var(0, 2, 3)]
        );
        let negatives = formula
            .clauses()
            .iter()
            .filter(|c| c.len() == 1 && !c[0].is_positive())
            .count();
        // all other pairs of layer 0
        assert_eq!(negatives, 4);
    }

    #[test]
    fn prefix_deeper_than_instance_is_rejected() {
        let prefix = Network::new(2, vec![canonical_first_layer(2), canonical_first_layer(2)]);
        assert!(matches!(
            encode_structure(2, 1, &prefix),
            Err(EncodeError::PrefixTooDeep { .. })
        ));
    }

    #[test]
    fn sorting_one_zero_forces_the_gate() {
        let (mut formula, mut map) = encode_structure(2, 1, &Network::empty(2)).unwrap();
        add_sortedness(&mut formula, &mut map, &"10".parse().unwrap()).unwrap();
        let models = all_models(&formula);
        assert!(!models.is_empty());
        let g = map.comparator_var(0, 0, 1) as usize;
        assert!(models.iter().all(|m| m[g]));
    }

    #[test]
    fn sorted_input_is_satisfied_by_any_network() {
        let (mut formula, mut map) = encode_structure(3, 2, &Network::empty(3)).unwrap();
        add_sortedness(&mut formula, &mut map, &"011".parse().unwrap()).unwrap();
        for network in [
            Network::empty(3),
            Network::new(3, vec![canonical_first_layer(3)]),
            crate::generators::batcher_oddeven_sort(3).truncated(2),
        ] {
            let assignment = induced_assignment(&formula, &map, &network);
            assert_eq!(formula.first_falsified(|v| assignment[v as usize]), None);
        }
    }

    #[test]
    fn duplicate_registration_is_a_no_op() {
        let (mut formula, mut map) = encode_structure(3, 2, &Network::empty(3)).unwrap();
        let x = "101".parse().unwrap();
        add_sortedness(&mut formula, &mut map, &x).unwrap();
        let vars = formula.num_vars();
        let clauses = formula.num_clauses();
        add_sortedness(&mut formula, &mut map, &x).unwrap();
        assert_eq!(formula.num_vars(), vars);
        assert_eq!(formula.num_clauses(), clauses);
        assert_eq!(map.inputs().len(), 1);
    }

    #[test]
    fn variable_counts_match_the_size_formulas() {
        let n = 5;
        let d = 4;
        let (mut formula, mut map) = encode_structure(n, d, &Network::empty(n)).unwrap();
        for idx in 0..7u64 {
            add_sortedness(&mut formula, &mut map, &BitVector::from_index(n, idx * 3)).unwrap();
        }
        add_reachability(&mut formula, &mut map);
        let inputs = map.inputs().len();
        assert_eq!(map.value_var_count(), (inputs * (d + 1) * n) as u32);
        assert_eq!(map.reach_var_count(), ((d + 1) * n * n) as u32);
        let structural = d as u32 * (n * (n - 1) / 2) as u32 + (d * n) as u32;
        assert_eq!(
            formula.num_vars(),
            structural + map.value_var_count() + map.reach_var_count()
        );
    }

    #[test]
    fn reachability_n2_d1_forces_the_gate() {
        let (mut formula, mut map) = encode_structure(2, 1, &Network::empty(2)).unwrap();
        add_reachability(&mut formula, &mut map);
        let models = all_models(&formula);
        assert!(!models.is_empty());
        let g = map.comparator_var(0, 0, 1) as usize;
        assert!(models.iter().all(|m| m[g]));
    }

    #[test]
    fn reachability_is_idempotent() {
        let (mut formula, mut map) = encode_structure(2, 1, &Network::empty(2)).unwrap();
        add_reachability(&mut formula, &mut map);
        let snapshot = (formula.num_vars(), formula.num_clauses());
        add_reachability(&mut formula, &mut map);
        assert_eq!((formula.num_vars(), formula.num_clauses()), snapshot);
    }

    #[test]
    fn decode_strips_empty_layers_and_reports_effective_depth() {
        let (_, map) = encode_structure(3, 2, &Network::empty(3)).unwrap();
        let decoded = decode_model(&map, |_| false).unwrap();
        assert_eq!(decoded.network, Network::empty(3));
        assert_eq!(decoded.effective_depth, 0);
        assert_eq!(decoded.declared_depth, 2);
    }

    #[test]
    fn decode_detects_conflicting_models() {
        let (_, map) = encode_structure(3, 1, &Network::empty(3)).unwrap();
        let err = decode_model(&map, |_| true).unwrap_err();
        assert!(matches!(err, DecodeError::ConflictingModel { .. }));
    }

    #[test]
    fn decode_round_trips_the_prefix() {
        let prefix = Network::new(4, vec![canonical_first_layer(4)]);
        let (formula, map) = encode_structure(4, 2, &prefix).unwrap();
        let assignment = induced_assignment(&formula, &map, &prefix);
        let decoded = decode_model(&map, |v| assignment[v as usize]).unwrap();
        assert_eq!(decoded.network, prefix);
    }

    #[test]
    fn induced_assignment_of_a_sorting_network_satisfies_everything() {
        let network = crate::generators::batcher_oddeven_sort(4);
        let (mut formula, mut map) =
            encode_structure(4, network.depth(), &Network::empty(4)).unwrap();
        for idx in 0..16u64 {
            add_sortedness(&mut formula, &mut map, &BitVector::from_index(4, idx)).unwrap();
        }
        add_reachability(&mut formula, &mut map);
        let assignment = induced_assignment(&formula, &map, &network);
        assert_eq!(formula.first_falsified(|v| assignment[v as usize]), None);
    }

    #[test]
    fn empty_formula_dimacs() {
        let mut buffer = Vec::new();
        emit_dimacs(&CnfFormula::new(), None, &mut buffer).unwrap();
        assert_eq!(String::from_utf8(buffer).unwrap(), "p cnf 0 0\n");
    }

    #[test]
    fn dimacs_round_trip() {
        let (mut formula, mut map) = encode_structure(3, 2, &Network::empty(3)).unwrap();
        add_sortedness(&mut formula, &mut map, &"110".parse().unwrap()).unwrap();
        let mut buffer = Vec::new();
        emit_dimacs(&formula, Some(&map), &mut buffer).unwrap();
        let parsed = parse_dimacs(&buffer[..]).unwrap();
        assert_eq!(parsed, formula);
    }

    #[test]
    fn dimacs_golden_structure_n3_d3() {
        let (formula, map) = encode_structure(3, 3, &Network::empty(3)).unwrap();
        let mut buffer = Vec::new();
        emit_dimacs(&formula, Some(&map), &mut buffer).unwrap();
        let expected = include_str!("../tests/golden/structure_n3_d3.cnf");
        assert_eq!(String::from_utf8(buffer).unwrap(), expected);
    }

    #[test]
    fn dimacs_parse_rejects_garbage() {
        assert!(parse_dimacs("p cnf 1 1\n1 x 0\n".as_bytes()).is_err());
        assert!(parse_dimacs("1 0\n".as_bytes()).is_err());
        assert!(parse_dimacs("p cnf 1 1\n2 0\n".as_bytes()).is_err());
        assert!(parse_dimacs("p cnf 1 1\n1\n".as_bytes()).is_err());
    }
}
