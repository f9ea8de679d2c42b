//! Embedded conflict-driven clause-learning solver.
//!
//! Contains no randomness: decisions break activity ties by variable index,
//! restarts follow the Luby sequence, and clause reduction orders by (glue,
//! length, age). Two runs on the same clause sequence produce the same trail,
//! so synthesis loops built on top are replayable.

use std::time::{Duration, Instant};

use crate::encode::{CnfFormula, Var};

/// Internal literal: variable `v` (0-based) maps to codes `2v` (positive) and
/// `2v + 1` (negated).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct L(u32);

impl L {
    fn new(var: u32, negated: bool) -> L {
        L(var * 2 + negated as u32)
    }

    fn var(self) -> u32 {
        self.0 >> 1
    }

    fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    fn negated(self) -> L {
        L(self.0 ^ 1)
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<L>,
    learned: bool,
    /// Number of distinct decision levels at learn time; low glue survives
    /// database reduction.
    glue: u32,
    deleted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: u32,
    /// Cached literal of the clause; if already true the clause needs no work.
    blocker: L,
}

/// Max-heap over variable activities with index-based tie-breaking (smaller
/// variable wins), supporting membership queries and removal by position.
#[derive(Debug, Default)]
struct VarOrder {
    heap: Vec<u32>,
    position: Vec<i32>,
}

impl VarOrder {
    fn grow_to(&mut self, vars: usize) {
        self.position.resize(vars, -1);
    }

    fn contains(&self, v: u32) -> bool {
        self.position[v as usize] >= 0
    }

    fn before(a: u32, b: u32, activity: &[f64]) -> bool {
        activity[a as usize] > activity[b as usize]
            || (activity[a as usize] == activity[b as usize] && a < b)
    }

    fn insert(&mut self, v: u32, activity: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.position[v as usize] = self.heap.len() as i32;
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, activity);
    }

    fn pop(&mut self, activity: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.position[top as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.sift_down(0, activity);
        }
        Some(top)
    }

    fn rescore(&mut self, v: u32, activity: &[f64]) {
        if let Ok(pos) = usize::try_from(self.position[v as usize]) {
            self.sift_up(pos, activity);
        }
    }

    fn sift_up(&mut self, mut pos: usize, activity: &[f64]) {
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if Self::before(self.heap[pos], self.heap[parent], activity) {
                self.swap(pos, parent);
                pos = parent;
            } else {
                return;
            }
        }
    }

    fn sift_down(&mut self, mut pos: usize, activity: &[f64]) {
        loop {
            let left = 2 * pos + 1;
            if left >= self.heap.len() {
                return;
            }
            let right = left + 1;
            let best = if right < self.heap.len()
                && Self::before(self.heap[right], self.heap[left], activity)
            {
                right
            } else {
                left
            };
            if Self::before(self.heap[best], self.heap[pos], activity) {
                self.swap(pos, best);
                pos = best;
            } else {
                return;
            }
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.position[self.heap[a] as usize] = a as i32;
        self.position[self.heap[b] as usize] = b as i32;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CdclStatus {
    Satisfiable,
    Unsatisfiable,
    Unknown,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CdclBudget {
    pub conflicts: Option<u64>,
    pub wall: Option<Duration>,
}

const ACTIVITY_DECAY: f64 = 0.95;
const ACTIVITY_RESCALE: f64 = 1e100;
const RESTART_BASE: u64 = 256;

fn lit_value(assign: &[i8], lit: L) -> Option<bool> {
    match assign[lit.var() as usize] {
        0 => None,
        v => Some((v > 0) != lit.is_negated()),
    }
}

#[derive(Debug)]
pub(crate) struct Cdcl {
    num_vars: usize,
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    /// 0 unassigned, 1 true, -1 false, per variable.
    assign: Vec<i8>,
    phase: Vec<bool>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<L>,
    trail_lim: Vec<usize>,
    queue_head: usize,
    activity: Vec<f64>,
    activity_step: f64,
    order: VarOrder,
    seen: Vec<bool>,
    ok: bool,
    learned_live: u64,
    reductions: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

impl Cdcl {
    pub fn new(num_vars: usize) -> Self {
        let mut solver = Self {
            num_vars: 0,
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            phase: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            queue_head: 0,
            activity: Vec::new(),
            activity_step: 1.0,
            order: VarOrder::default(),
            seen: Vec::new(),
            ok: true,
            learned_live: 0,
            reductions: 0,
            conflicts: 0,
            decisions: 0,
            propagations: 0,
        };
        solver.grow_to(num_vars);
        solver
    }

    pub fn grow_to(&mut self, num_vars: usize) {
        if num_vars <= self.num_vars {
            return;
        }
        self.num_vars = num_vars;
        self.watches.resize(num_vars * 2, Vec::new());
        self.assign.resize(num_vars, 0);
        self.phase.resize(num_vars, false);
        self.level.resize(num_vars, 0);
        self.reason.resize(num_vars, None);
        self.activity.resize(num_vars, 0.0);
        self.seen.resize(num_vars, false);
        self.order.grow_to(num_vars);
    }

    fn value(&self, lit: L) -> Option<bool> {
        match self.assign[lit.var() as usize] {
            0 => None,
            v => Some((v > 0) != lit.is_negated()),
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause at the root level. The solver must not be mid-search
    /// (callers add clauses only between `solve` calls).
    pub fn add_clause(&mut self, lits: &[Var], signs: impl Fn(usize) -> bool) {
        debug_assert_eq!(self.decision_level(), 0);
        if !self.ok {
            return;
        }
        let mut clause: Vec<L> = lits
            .iter()
            .enumerate()
            .map(|(k, &v)| L::new(v - 1, !signs(k)))
            .collect();
        clause.sort_unstable_by_key(|l| l.0);
        clause.dedup();
        // tautology?
        if clause.windows(2).any(|w| w[0].var() == w[1].var()) {
            return;
        }
        // root-level simplification
        let mut simplified = Vec::with_capacity(clause.len());
        for lit in clause {
            match self.value(lit) {
                Some(true) => return,
                Some(false) => {}
                None => simplified.push(lit),
            }
        }
        match simplified.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(simplified[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(simplified, false, 0);
            }
        }
    }

    fn attach(&mut self, lits: Vec<L>, learned: bool, glue: u32) -> u32 {
        debug_assert!(lits.len() >= 2);
        let index = self.clauses.len() as u32;
        self.watches[lits[0].negated().index()].push(Watcher {
            clause: index,
            blocker: lits[1],
        });
        self.watches[lits[1].negated().index()].push(Watcher {
            clause: index,
            blocker: lits[0],
        });
        if learned {
            self.learned_live += 1;
        }
        self.clauses.push(Clause {
            lits,
            learned,
            glue,
            deleted: false,
        });
        index
    }

    fn enqueue(&mut self, lit: L, reason: Option<u32>) {
        debug_assert_eq!(self.value(lit), None);
        let var = lit.var() as usize;
        self.assign[var] = if lit.is_negated() { -1 } else { 1 };
        self.phase[var] = !lit.is_negated();
        self.level[var] = self.decision_level();
        self.reason[var] = reason;
        self.trail.push(lit);
    }

    /// Two-watched-literal unit propagation; returns a conflicting clause.
    fn propagate(&mut self) -> Option<u32> {
        while self.queue_head < self.trail.len() {
            let lit = self.trail[self.queue_head];
            self.queue_head += 1;
            self.propagations += 1;
            let false_lit = lit.negated();
            let mut watchers = std::mem::take(&mut self.watches[lit.index()]);
            let mut kept = 0;
            let mut conflict = None;
            'watchers: for w in 0..watchers.len() {
                let watcher = watchers[w];
                if self.value(watcher.blocker) == Some(true) {
                    watchers[kept] = watcher;
                    kept += 1;
                    continue;
                }
                let clause_index = watcher.clause as usize;
                if self.clauses[clause_index].deleted {
                    continue; // watcher dropped
                }
                let (unit, new_watch) = {
                    let assign = &self.assign;
                    let lits = &mut self.clauses[clause_index].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                    debug_assert_eq!(lits[1], false_lit);
                    let first = lits[0];
                    if first != watcher.blocker && lit_value(assign, first) == Some(true) {
                        watchers[kept] = Watcher {
                            clause: watcher.clause,
                            blocker: first,
                        };
                        kept += 1;
                        continue 'watchers;
                    }
                    let mut found = None;
                    #[allow(clippy::needless_range_loop)]
                    for k in 2..lits.len() {
                        if lit_value(assign, lits[k]) != Some(false) {
                            found = Some(k);
                            break;
                        }
                    }
                    match found {
                        Some(k) => {
                            lits.swap(1, k);
                            (None, Some(lits[1]))
                        }
                        None => (Some(first), None),
                    }
                };
                if let Some(other) = new_watch {
                    self.watches[other.negated().index()].push(Watcher {
                        clause: watcher.clause,
                        blocker: self.clauses[clause_index].lits[0],
                    });
                    continue;
                }
                let first = unit.expect("no replacement watch");
                // clause is unit or conflicting; the watcher stays
                watchers[kept] = watcher;
                kept += 1;
                match self.value(first) {
                    None => self.enqueue(first, Some(watcher.clause)),
                    Some(true) => {}
                    Some(false) => {
                        // conflict: keep the unvisited watchers and stop
                        for r in w + 1..watchers.len() {
                            let rest = watchers[r];
                            watchers[kept] = rest;
                            kept += 1;
                        }
                        conflict = Some(watcher.clause);
                        break;
                    }
                }
            }
            watchers.truncate(kept);
            self.watches[lit.index()] = watchers;
            if let Some(conflict) = conflict {
                self.queue_head = self.trail.len();
                return Some(conflict);
            }
        }
        None
    }

    fn cancel_until(&mut self, target: u32) {
        if self.decision_level() <= target {
            return;
        }
        let keep = self.trail_lim[target as usize];
        for k in (keep..self.trail.len()).rev() {
            let var = self.trail[k].var();
            self.assign[var as usize] = 0;
            self.reason[var as usize] = None;
            self.order.insert(var, &self.activity);
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(target as usize);
        self.queue_head = keep;
    }

    fn bump_variable(&mut self, var: u32) {
        self.activity[var as usize] += self.activity_step;
        if self.activity[var as usize] > ACTIVITY_RESCALE {
            for a in self.activity.iter_mut() {
                *a *= 1.0 / ACTIVITY_RESCALE;
            }
            self.activity_step *= 1.0 / ACTIVITY_RESCALE;
        }
        self.order.rescore(var, &self.activity);
    }

    /// First-UIP conflict analysis with basic reason-subsumption minimization.
    /// Returns the learned clause (asserting literal first, second-highest
    /// level literal second), the backtrack level, and the glue.
    fn analyze(&mut self, conflict: u32) -> (Vec<L>, u32, u32) {
        let mut learned: Vec<L> = vec![L(0)]; // slot for the asserting literal
        let current = self.decision_level();
        let mut counter = 0u32;
        let mut index = self.trail.len();
        let mut clause_ref = conflict;
        let mut resolved: Option<L> = None;
        loop {
            let skip = usize::from(resolved.is_some());
            let lits: Vec<L> = self.clauses[clause_ref as usize].lits[skip..].to_vec();
            for q in lits {
                let var = q.var();
                if !self.seen[var as usize] && self.level[var as usize] > 0 {
                    self.seen[var as usize] = true;
                    self.bump_variable(var);
                    if self.level[var as usize] >= current {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var() as usize] {
                    break;
                }
            }
            let p = self.trail[index];
            self.seen[p.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                learned[0] = p.negated();
                break;
            }
            clause_ref = self.reason[p.var() as usize].expect("non-decision on conflict side");
            resolved = Some(p);
        }

        // drop literals whose reason is already subsumed by the clause
        let seen = &self.seen;
        let redundant = |lit: &L, clauses: &[Clause], reason: &[Option<u32>], level: &[u32]| {
            match reason[lit.var() as usize] {
                None => false,
                Some(r) => clauses[r as usize].lits[1..]
                    .iter()
                    .all(|other| seen[other.var() as usize] || level[other.var() as usize] == 0),
            }
        };
        let mut kept = vec![learned[0]];
        for lit in &learned[1..] {
            if !redundant(lit, &self.clauses, &self.reason, &self.level) {
                kept.push(*lit);
            }
        }
        // clear the scratch flags of dropped literals too
        for lit in &learned {
            self.seen[lit.var() as usize] = false;
        }
        let mut learned = kept;

        let backtrack = if learned.len() == 1 {
            0
        } else {
            let mut best = 1;
            for k in 2..learned.len() {
                if self.level[learned[k].var() as usize] > self.level[learned[best].var() as usize]
                {
                    best = k;
                }
            }
            learned.swap(1, best);
            self.level[learned[1].var() as usize]
        };
        let mut levels: Vec<u32> = learned
            .iter()
            .map(|l| self.level[l.var() as usize])
            .collect();
        levels.sort_unstable();
        levels.dedup();
        let glue = levels.len() as u32;
        (learned, backtrack, glue)
    }

    /// Drops the worst half of the removable learned clauses (high glue
    /// first); reasons and low-glue clauses survive. Watchers pointing at
    /// deleted clauses are discarded lazily during propagation, plus eagerly
    /// here to keep the lists tight.
    fn reduce_learned(&mut self) {
        self.reductions += 1;
        let locked: Vec<bool> = {
            let mut locked = vec![false; self.clauses.len()];
            for lit in &self.trail {
                if let Some(r) = self.reason[lit.var() as usize] {
                    locked[r as usize] = true;
                }
            }
            locked
        };
        let mut removable: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&i| {
                let c = &self.clauses[i as usize];
                c.learned && !c.deleted && !locked[i as usize] && c.glue > 2
            })
            .collect();
        removable.sort_unstable_by_key(|&i| {
            let c = &self.clauses[i as usize];
            (c.glue, c.lits.len(), i)
        });
        let start = removable.len() / 2;
        for &i in &removable[start..] {
            let clause = &mut self.clauses[i as usize];
            clause.deleted = true;
            clause.lits = Vec::new();
            self.learned_live -= 1;
        }
        for list in self.watches.iter_mut() {
            list.retain(|w| !self.clauses[w.clause as usize].deleted);
        }
    }

    fn decide(&mut self) -> bool {
        while let Some(var) = self.order.pop(&self.activity) {
            if self.assign[var as usize] == 0 {
                self.decisions += 1;
                self.trail_lim.push(self.trail.len());
                self.enqueue(L::new(var, !self.phase[var as usize]), None);
                return true;
            }
        }
        false
    }

    /// Luby restart sequence: 1, 1, 2, 1, 1, 2, 4, ...
    fn luby(mut x: u64) -> u64 {
        let mut size = 1u64;
        let mut seq = 0u32;
        while size < x + 1 {
            seq += 1;
            size = 2 * size + 1;
        }
        while size - 1 != x {
            size = (size - 1) / 2;
            seq -= 1;
            x %= size;
        }
        1u64 << seq
    }

    pub fn solve(&mut self, budget: &CdclBudget) -> CdclStatus {
        if !self.ok {
            return CdclStatus::Unsatisfiable;
        }
        let started = Instant::now();
        let conflicts_at_start = self.conflicts;
        let mut restarts = 0u64;
        let mut conflicts_since_restart = 0u64;

        self.cancel_until(0);
        // all unassigned variables enter the order deterministically
        for var in 0..self.num_vars as u32 {
            if self.assign[var as usize] == 0 {
                self.order.insert(var, &self.activity);
            }
        }
        if self.propagate().is_some() {
            self.ok = false;
            return CdclStatus::Unsatisfiable;
        }

        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return CdclStatus::Unsatisfiable;
                }
                let (learned, backtrack, glue) = self.analyze(conflict);
                self.cancel_until(backtrack);
                if learned.len() == 1 {
                    self.enqueue(learned[0], None);
                } else {
                    let asserting = learned[0];
                    let clause_ref = self.attach(learned, true, glue);
                    self.enqueue(asserting, Some(clause_ref));
                }
                self.activity_step *= 1.0 / ACTIVITY_DECAY;

                if let Some(max) = budget.conflicts {
                    if self.conflicts - conflicts_at_start >= max {
                        self.cancel_until(0);
                        return CdclStatus::Unknown;
                    }
                }
                if self.conflicts.is_multiple_of(1024) {
                    if let Some(wall) = budget.wall {
                        if started.elapsed() >= wall {
                            self.cancel_until(0);
                            return CdclStatus::Unknown;
                        }
                    }
                }
                if conflicts_since_restart >= RESTART_BASE * Self::luby(restarts) {
                    restarts += 1;
                    conflicts_since_restart = 0;
                    self.cancel_until(0);
                }
                if self.learned_live > 4000 + 2000 * self.reductions {
                    self.reduce_learned();
                }
            } else {
                if self.trail.len() == self.num_vars {
                    return CdclStatus::Satisfiable;
                }
                if self.decisions.is_multiple_of(4096) {
                    if let Some(wall) = budget.wall {
                        if started.elapsed() >= wall {
                            self.cancel_until(0);
                            return CdclStatus::Unknown;
                        }
                    }
                }
                let decided = self.decide();
                debug_assert!(decided, "undecidable only when trail is complete");
            }
        }
    }

    /// Variable values after a satisfiable solve; index 0 unused.
    pub fn model(&self) -> Vec<bool> {
        debug_assert_eq!(self.trail.len(), self.num_vars);
        let mut values = vec![false; self.num_vars + 1];
        for var in 0..self.num_vars {
            values[var + 1] = self.assign[var] > 0;
        }
        values
    }

    /// Loads a formula into a fresh solver.
    pub fn from_formula(formula: &CnfFormula) -> Self {
        let mut solver = Cdcl::new(formula.num_vars() as usize);
        solver.load_clauses(formula, 0);
        solver
    }

    /// Appends clauses `from..` of the formula (for incremental extension).
    pub fn load_clauses(&mut self, formula: &CnfFormula, from: usize) {
        self.grow_to(formula.num_vars() as usize);
        self.cancel_until(0);
        for clause in &formula.clauses()[from..] {
            let vars: Vec<Var> = clause.iter().map(|l| l.var()).collect();
            self.add_clause(&vars, |k| clause[k].is_positive());
        }
    }
}
