//! Counterexample-guided synthesis: ask the solver for a network sorting the
//! inputs collected so far, look for an input the candidate fails on, add it,
//! and repeat until the candidate survives — or the formula becomes
//! unsatisfiable, which proves no network of the requested depth extending
//! the prefix sorts even that input subset.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    BackendError, EmbeddedBackend, SatBackend, SolveLimits, SolveStatus,
};
use crate::encode::{
    add_reachability, add_sortedness, decode_model, encode_structure, CnfFormula, EncodeError,
    Lit, Var,
};
use crate::network::{BitVector, Network, MAX_WIDTH};
use crate::verify::{
    family_vectors, find_counterexample, verify_01_with, InputFamily, Verdict, VerifyError,
    VerifyOptions,
};

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub n: usize,
    pub d: usize,
    /// Layers fixed up front; the solver searches the remaining ones.
    pub prefix: Network,
    /// Constrain candidates to connect every input to every output.
    pub use_reachability: bool,
    /// Inputs registered before the first solver call.
    pub seed_inputs: InputFamily,
    /// Where counterexamples are searched.
    pub counterexample_family: InputFamily,
    /// Budget per solver call.
    pub solve_limits: SolveLimits,
    /// Budget for the whole loop.
    pub global_wall: Option<Duration>,
    /// Reserved for randomized backends; the embedded solver is deterministic
    /// regardless.
    pub seed: u64,
    pub verify: VerifyOptions,
}

impl SynthesisConfig {
    pub fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            prefix: Network::empty(n),
            use_reachability: true,
            seed_inputs: InputFamily::Windowed { max_window: 2 },
            counterexample_family: InputFamily::AllBinary,
            solve_limits: SolveLimits::unlimited(),
            global_wall: None,
            seed: 0,
            verify: VerifyOptions::default(),
        }
    }

    pub fn with_prefix(mut self, prefix: Network) -> Self {
        self.prefix = prefix;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisStatus {
    NetworkFound,
    Infeasible,
    ResourceLimit,
}

/// One loop iteration: the solver call and the counterexample it led to
/// (absent on the final iteration).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counterexample: Option<BitVector>,
    pub solver_status: SolveStatus,
    pub conflicts: u64,
    pub decisions: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub status: SynthesisStatus,
    /// Present iff `status` is `NetworkFound`; independently re-verified.
    pub network: Option<Network>,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Error)]
pub enum CegisError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("replayed trace does not fit the configuration: {0}")]
    TraceMismatch(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("counterexample search hit its resource limit")]
    CounterexampleSearchLimit,
}

/// Runs the loop with a live counterexample search.
pub fn synthesize(
    config: &SynthesisConfig,
    backend: &mut dyn SatBackend,
) -> Result<SynthesisOutcome, CegisError> {
    run(config, backend, None)
}

/// Re-runs a recorded counterexample sequence without searching: each
/// iteration pops the next recorded input instead of evaluating the
/// candidate, and the final candidate is still verified independently. With a
/// deterministic backend this reproduces the original outcome.
pub fn replay(
    config: &SynthesisConfig,
    trace: &[IterationRecord],
    backend: &mut dyn SatBackend,
) -> Result<SynthesisOutcome, CegisError> {
    let queue: VecDeque<BitVector> = trace.iter().filter_map(|r| r.counterexample).collect();
    run(config, backend, Some(queue))
}

fn run(
    config: &SynthesisConfig,
    backend: &mut dyn SatBackend,
    mut scripted: Option<VecDeque<BitVector>>,
) -> Result<SynthesisOutcome, CegisError> {
    if config.n > MAX_WIDTH {
        return Err(CegisError::Config(format!(
            "{} channels exceed the supported maximum of {MAX_WIDTH}",
            config.n
        )));
    }
    let deadline = config.global_wall.map(|w| Instant::now() + w);
    let exhaustive =
        config.n as u32 <= config.verify.exhaustive_limit.min(MAX_WIDTH as u32 - 1);

    let (mut formula, mut map) = encode_structure(config.n, config.d, &config.prefix)?;
    if config.use_reachability {
        add_reachability(&mut formula, &mut map);
    }
    for x in family_vectors(config.n, &config.seed_inputs) {
        add_sortedness(&mut formula, &mut map, &x)?;
    }
    let mut added: HashSet<BitVector> = map.inputs().iter().copied().collect();
    let mut trace: Vec<IterationRecord> = Vec::new();

    loop {
        let iteration = trace.len() + 1;
        let mut limits = config.solve_limits;
        if let Some(deadline) = deadline {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Ok(SynthesisOutcome {
                    status: SynthesisStatus::ResourceLimit,
                    network: None,
                    trace,
                });
            }
            limits.wall = Some(limits.wall.map_or(remaining, |w| w.min(remaining)));
        }

        let started = Instant::now();
        let result = backend.solve(&formula, &limits)?;
        let wall_ms = started.elapsed().as_millis() as u64;
        let record = |counterexample: Option<BitVector>| IterationRecord {
            iteration,
            counterexample,
            solver_status: result.status,
            conflicts: result.stats.conflicts,
            decisions: result.stats.decisions,
            wall_ms,
        };

        match result.status {
            SolveStatus::Unknown => {
                trace.push(record(None));
                return Ok(SynthesisOutcome {
                    status: SynthesisStatus::ResourceLimit,
                    network: None,
                    trace,
                });
            }
            SolveStatus::Unsatisfiable => {
                // no network sorts even the current input subset; adding more
                // inputs cannot help
                trace.push(record(None));
                return Ok(SynthesisOutcome {
                    status: SynthesisStatus::Infeasible,
                    network: None,
                    trace,
                });
            }
            SolveStatus::Satisfiable => {
                let model = result.model.as_ref().expect("model accompanies sat");
                let candidate = decode_model(&map, |v| model.value(v))
                    .map_err(|e| CegisError::Internal(e.to_string()))?
                    .network;

                let found = match &mut scripted {
                    Some(queue) => queue.pop_front(),
                    None => next_counterexample(&candidate, config, exhaustive)?,
                };
                let cex = match found {
                    Some(x) => Some(x),
                    None => {
                        // the loop believes the candidate is done; never
                        // trust that without the independent verifier
                        match independent_witness(&candidate, config, exhaustive)? {
                            None => {
                                trace.push(record(None));
                                return Ok(SynthesisOutcome {
                                    status: SynthesisStatus::NetworkFound,
                                    network: Some(candidate),
                                    trace,
                                });
                            }
                            Some(witness) if scripted.is_some() => {
                                return Err(CegisError::TraceMismatch(format!(
                                    "final candidate fails on {witness}"
                                )));
                            }
                            // the family was weaker than the full check; feed
                            // the verifier's witness back into the loop
                            Some(witness) => Some(witness),
                        }
                    }
                };
                let x = cex.expect("counterexample present");
                if x.width() != config.n {
                    return Err(CegisError::TraceMismatch(format!(
                        "counterexample {x} has width {}, expected {}",
                        x.width(),
                        config.n
                    )));
                }
                if !added.insert(x) {
                    let message = format!("counterexample {x} repeated");
                    return Err(if scripted.is_some() {
                        CegisError::TraceMismatch(message)
                    } else {
                        CegisError::Internal(message)
                    });
                }
                if scripted.is_none() && candidate.evaluate(&x).is_sorted() {
                    return Err(CegisError::Internal(format!(
                        "counterexample {x} is sorted by the candidate"
                    )));
                }
                add_sortedness(&mut formula, &mut map, &x)?;
                trace.push(record(Some(x)));
            }
        }
    }
}

/// Counterexample search for one candidate: exhaustive evaluation when the
/// width permits, otherwise a SAT query over the fixed candidate (the
/// all-binary family only; windowed and explicit families stay enumerable at
/// any width).
fn next_counterexample(
    candidate: &Network,
    config: &SynthesisConfig,
    exhaustive: bool,
) -> Result<Option<BitVector>, CegisError> {
    if exhaustive || !matches!(config.counterexample_family, InputFamily::AllBinary) {
        Ok(find_counterexample(candidate, &config.counterexample_family))
    } else {
        find_counterexample_sat(candidate, &config.solve_limits)
    }
}

/// The final, independent check of a candidate the loop considers finished.
fn independent_witness(
    candidate: &Network,
    config: &SynthesisConfig,
    exhaustive: bool,
) -> Result<Option<BitVector>, CegisError> {
    if exhaustive {
        match verify_01_with(candidate, &config.verify)? {
            Verdict::SortsAll { .. } => Ok(None),
            Verdict::Counterexample { witness, .. } => Ok(Some(witness)),
        }
    } else {
        find_counterexample_sat(candidate, &config.solve_limits)
    }
}

/// Searches for an unsorted-output input of a fixed network with a SAT query:
/// value variables per layer boundary, gate semantics as hard clauses, and
/// "some adjacent output pair is inverted" as the goal.
pub fn find_counterexample_sat(
    network: &Network,
    limits: &SolveLimits,
) -> Result<Option<BitVector>, CegisError> {
    let n = network.n();
    let d = network.depth();
    if n < 2 {
        return Ok(None);
    }
    let mut formula = CnfFormula::new();
    let value_base = formula.new_vars(((d + 1) * n) as u32);
    let value = |t: usize, i: usize| -> Var { value_base + (t * n + i) as u32 };

    for (t, layer) in network.layers().iter().enumerate() {
        let mut touched = vec![false; n];
        for c in layer.comparators() {
            touched[c.low()] = true;
            touched[c.high()] = true;
            let a = value(t, c.low());
            let b = value(t, c.high());
            let a_next = value(t + 1, c.low());
            let b_next = value(t + 1, c.high());
            formula.add_clause(&[Lit::negative(a_next), Lit::positive(a)]);
            formula.add_clause(&[Lit::negative(a_next), Lit::positive(b)]);
            formula.add_clause(&[Lit::positive(a_next), Lit::negative(a), Lit::negative(b)]);
            formula.add_clause(&[Lit::positive(b_next), Lit::negative(a)]);
            formula.add_clause(&[Lit::positive(b_next), Lit::negative(b)]);
            formula.add_clause(&[Lit::negative(b_next), Lit::positive(a), Lit::positive(b)]);
        }
        for i in (0..n).filter(|&i| !touched[i]) {
            formula.add_clause(&[
                Lit::negative(value(t + 1, i)),
                Lit::positive(value(t, i)),
            ]);
            formula.add_clause(&[
                Lit::positive(value(t + 1, i)),
                Lit::negative(value(t, i)),
            ]);
        }
    }

    let violation_base = formula.new_vars((n - 1) as u32);
    let mut any = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let w = violation_base + i as u32;
        formula.add_clause(&[Lit::negative(w), Lit::positive(value(d, i))]);
        formula.add_clause(&[Lit::negative(w), Lit::negative(value(d, i + 1))]);
        any.push(Lit::positive(w));
    }
    formula.add_clause(&any);

    let mut backend = EmbeddedBackend::new();
    let result = backend.solve(&formula, limits)?;
    match result.status {
        SolveStatus::Satisfiable => {
            let model = result.model.expect("model accompanies sat");
            let witness = BitVector::from_fn(n, |i| model.value(value(0, i)));
            debug_assert!(!network.evaluate(&witness).is_sorted());
            Ok(Some(witness))
        }
        SolveStatus::Unsatisfiable => Ok(None),
        SolveStatus::Unknown => Err(CegisError::CounterexampleSearchLimit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::batcher_oddeven_sort;
    use crate::network::{Comparator, Layer};
    use crate::prefix::canonical_first_layer;
    use crate::verify::verify_01;

    fn run_config(config: &SynthesisConfig) -> SynthesisOutcome {
        let mut backend = EmbeddedBackend::new();
        synthesize(config, &mut backend).unwrap()
    }

    #[test]
    fn two_channels_depth_one_finds_the_unique_sorter() {
        let outcome = run_config(&SynthesisConfig::new(2, 1));
        assert_eq!(outcome.status, SynthesisStatus::NetworkFound);
        let network = outcome.network.unwrap();
        assert_eq!(
            network,
            Network::new(2, vec![Layer::new(vec![Comparator::new(0, 1)])])
        );
        assert!(outcome.trace.len() <= 2);
    }

    #[test]
    fn four_channels_depth_two_is_infeasible() {
        let outcome = run_config(&SynthesisConfig::new(4, 2));
        assert_eq!(outcome.status, SynthesisStatus::Infeasible);
        assert!(outcome.network.is_none());
        assert_eq!(
            outcome.trace.last().unwrap().solver_status,
            SolveStatus::Unsatisfiable
        );
    }

    #[test]
    fn four_channels_depth_three_is_found_and_verified() {
        let outcome = run_config(&SynthesisConfig::new(4, 3));
        assert_eq!(outcome.status, SynthesisStatus::NetworkFound);
        let network = outcome.network.unwrap();
        assert!(verify_01(&network).unwrap().sorts_all());
        assert!(network.depth() <= 3);
    }

    #[test]
    fn counterexamples_are_pairwise_distinct_and_grow_monotonically() {
        let outcome = run_config(&SynthesisConfig::new(5, 5));
        assert_eq!(outcome.status, SynthesisStatus::NetworkFound);
        let mut seen = HashSet::new();
        for (k, record) in outcome.trace.iter().enumerate() {
            assert_eq!(record.iteration, k + 1);
            if let Some(cex) = record.counterexample {
                assert!(seen.insert(cex), "repeated counterexample {cex}");
            }
        }
        // every record except the last carries a counterexample
        assert_eq!(seen.len(), outcome.trace.len() - 1);
    }

    #[test]
    fn prefix_is_respected() {
        let prefix = Network::new(4, vec![canonical_first_layer(4)]);
        let config = SynthesisConfig::new(4, 3).with_prefix(prefix.clone());
        let outcome = run_config(&config);
        let network = outcome.network.unwrap();
        assert_eq!(network.layers()[0], prefix.layers()[0]);
        assert!(verify_01(&network).unwrap().sorts_all());
    }

    #[test]
    fn empty_seed_set_matches_default_outcome_status() {
        let mut config = SynthesisConfig::new(3, 3);
        config.seed_inputs = InputFamily::Explicit(Vec::new());
        let outcome = run_config(&config);
        assert_eq!(outcome.status, SynthesisStatus::NetworkFound);
        assert!(verify_01(&outcome.network.unwrap()).unwrap().sorts_all());
    }

    #[test]
    fn replay_reproduces_the_run() {
        let config = SynthesisConfig::new(3, 3);
        let original = run_config(&config);
        let mut backend = EmbeddedBackend::new();
        let replayed = replay(&config, &original.trace, &mut backend).unwrap();
        assert_eq!(replayed.status, original.status);
        assert_eq!(replayed.network, original.network);
        assert_eq!(replayed.trace.len(), original.trace.len());
    }

    #[test]
    fn replay_of_a_recorded_run_keeps_the_iteration_count() {
        let config = SynthesisConfig::new(6, 5);
        let recorded = run_config(&config);
        assert_eq!(recorded.status, SynthesisStatus::NetworkFound);
        let mut backend = EmbeddedBackend::new();
        let replayed = replay(&config, &recorded.trace, &mut backend).unwrap();
        assert_eq!(replayed.status, recorded.status);
        assert_eq!(replayed.trace.len(), recorded.trace.len());
        assert_eq!(replayed.network, recorded.network);
    }

    #[test]
    fn replay_with_larger_depth_still_finds_a_network() {
        let config = SynthesisConfig::new(3, 3);
        let original = run_config(&config);
        let deeper = SynthesisConfig::new(3, 4);
        let mut backend = EmbeddedBackend::new();
        let replayed = replay(&deeper, &original.trace, &mut backend).unwrap();
        assert_eq!(replayed.status, SynthesisStatus::NetworkFound);
        assert!(verify_01(&replayed.network.unwrap()).unwrap().sorts_all());
    }

    #[test]
    fn replay_detects_width_mismatch() {
        let config = SynthesisConfig::new(3, 3);
        let original = run_config(&config);
        let wrong = SynthesisConfig::new(4, 3);
        let mut backend = EmbeddedBackend::new();
        match replay(&wrong, &original.trace, &mut backend) {
            Err(CegisError::TraceMismatch(_)) => {}
            other => panic!("expected trace mismatch, got {other:?}"),
        }
    }

    #[test]
    fn sat_counterexample_finder_agrees_with_exhaustive_search() {
        for network in [
            batcher_oddeven_sort(5),
            batcher_oddeven_sort(5).truncated(3),
            batcher_oddeven_sort(6).truncated(2),
            Network::empty(4),
        ] {
            let by_sat = find_counterexample_sat(&network, &SolveLimits::unlimited()).unwrap();
            let by_scan = find_counterexample(&network, &InputFamily::AllBinary);
            assert_eq!(by_sat.is_some(), by_scan.is_some(), "{network}");
            if let Some(witness) = by_sat {
                assert!(!network.evaluate(&witness).is_sorted());
            }
        }
    }

    #[test]
    fn global_wall_budget_reports_resource_limit() {
        let mut config = SynthesisConfig::new(6, 5);
        config.global_wall = Some(Duration::ZERO);
        let outcome = run_config(&config);
        assert_eq!(outcome.status, SynthesisStatus::ResourceLimit);
    }

    #[test]
    fn trace_serializes_to_the_stable_schema() {
        let record = IterationRecord {
            iteration: 3,
            counterexample: Some("0110".parse().unwrap()),
            solver_status: SolveStatus::Satisfiable,
            conflicts: 17,
            decisions: 40,
            wall_ms: 2,
        };
        let json = serde_json::to_string(&record).unwrap();
        assert_eq!(
            json,
            r#"{"iteration":3,"counterexample":"0110","solver_status":"satisfiable","conflicts":17,"decisions":40,"wall_ms":2}"#
        );
    }
}
