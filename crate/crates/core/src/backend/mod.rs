//! Pluggable SAT solving: an embedded CDCL solver and an external-process
//! DIMACS client behind one trait.
//!
//! Satisfiable results are always re-checked against the input formula before
//! they are returned; unsatisfiable answers are trusted. An optional
//! simplification pass can be slotted in front of either backend (the default
//! is pass-through).

mod cdcl;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::{emit_dimacs, CnfFormula, Var};
use cdcl::{Cdcl, CdclBudget, CdclStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Satisfiable,
    Unsatisfiable,
    Unknown,
}

/// A complete assignment; every variable of the formula has a value.
#[derive(Debug, Clone)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn value(&self, var: Var) -> bool {
        self.values[var as usize]
    }

    pub fn num_vars(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub status: SolveStatus,
    /// Present iff satisfiable.
    pub model: Option<Model>,
    pub stats: SolverStats,
}

/// Per-call resource budget; `unknown` results mean a limit fired.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveLimits {
    pub wall: Option<Duration>,
    pub conflicts: Option<u64>,
}

impl SolveLimits {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn wall(duration: Duration) -> Self {
        Self {
            wall: Some(duration),
            conflicts: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to launch solver `{path}`: {source}")]
    Spawn {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("external solver exited with unexpected code {code:?}: {stderr}")]
    UnexpectedExit { code: Option<i32>, stderr: String },
    #[error("solver output has no `s` status line")]
    MissingStatusLine,
    #[error("malformed solver output: {0}")]
    MalformedOutput(String),
    #[error("solver model is truncated (no terminating 0)")]
    TruncatedModel,
    #[error("solver model mentions variable {var} outside the formula")]
    LiteralOutOfRange { var: u64 },
    #[error("solver returned a model that falsifies clause {clause}")]
    InvalidModel { clause: usize },
}

/// An optional simplification applied to the formula before solving. Must
/// preserve the variable numbering and the model set over those variables.
pub trait Preprocessor {
    fn name(&self) -> &str;
    fn simplify(&self, formula: &CnfFormula) -> CnfFormula;
}

pub trait SatBackend {
    fn name(&self) -> String;
    fn solve(
        &mut self,
        formula: &CnfFormula,
        limits: &SolveLimits,
    ) -> Result<SolverResult, BackendError>;
}

/// In-process CDCL backend. When a formula extends the previously solved one
/// (same clause prefix, possibly more variables and clauses) the solver state
/// — learned clauses, activities, saved phases — is kept and only the new
/// clauses are loaded, which is what iterative synthesis wants.
#[derive(Default)]
pub struct EmbeddedBackend {
    solver: Option<Cdcl>,
    loaded: CnfFormula,
    preprocessor: Option<Box<dyn Preprocessor>>,
}

impl EmbeddedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_preprocessor(preprocessor: Box<dyn Preprocessor>) -> Self {
        Self {
            preprocessor: Some(preprocessor),
            ..Self::default()
        }
    }
}

impl SatBackend for EmbeddedBackend {
    fn name(&self) -> String {
        match &self.preprocessor {
            Some(p) => format!("embedded+{}", p.name()),
            None => "embedded".to_string(),
        }
    }

    fn solve(
        &mut self,
        formula: &CnfFormula,
        limits: &SolveLimits,
    ) -> Result<SolverResult, BackendError> {
        let started = Instant::now();
        let processed;
        let effective = match &self.preprocessor {
            Some(p) => {
                processed = p.simplify(formula);
                debug_assert!(processed.num_vars() >= formula.num_vars());
                &processed
            }
            None => formula,
        };

        let extends = self.solver.is_some()
            && effective.num_vars() >= self.loaded.num_vars()
            && effective.num_clauses() >= self.loaded.num_clauses()
            && effective.clauses()[..self.loaded.num_clauses()] == *self.loaded.clauses();
        if extends {
            let from = self.loaded.num_clauses();
            self.solver
                .as_mut()
                .expect("solver present")
                .load_clauses(effective, from);
        } else {
            self.solver = Some(Cdcl::from_formula(effective));
        }
        self.loaded = effective.clone();
        let solver = self.solver.as_mut().expect("solver present");

        let before = (solver.conflicts, solver.decisions, solver.propagations);
        let status = solver.solve(&CdclBudget {
            conflicts: limits.conflicts,
            wall: limits.wall,
        });
        let stats = SolverStats {
            conflicts: solver.conflicts - before.0,
            decisions: solver.decisions - before.1,
            propagations: solver.propagations - before.2,
            wall: started.elapsed(),
        };
        match status {
            CdclStatus::Satisfiable => {
                let values = solver.model();
                if let Some(clause) = formula.first_falsified(|v| values[v as usize]) {
                    return Err(BackendError::InvalidModel { clause });
                }
                Ok(SolverResult {
                    status: SolveStatus::Satisfiable,
                    model: Some(Model { values }),
                    stats,
                })
            }
            CdclStatus::Unsatisfiable => Ok(SolverResult {
                status: SolveStatus::Unsatisfiable,
                model: None,
                stats,
            }),
            CdclStatus::Unknown => Ok(SolverResult {
                status: SolveStatus::Unknown,
                model: None,
                stats,
            }),
        }
    }
}

/// Client for any solver binary that takes a DIMACS file argument and prints
/// the conventional `s SATISFIABLE` / `s UNSATISFIABLE` status plus `v` model
/// lines. Exit codes 0, 10 and 20 are accepted.
pub struct ExternalBackend {
    path: PathBuf,
    extra_args: Vec<String>,
    preprocessor: Option<Box<dyn Preprocessor>>,
}

impl ExternalBackend {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            extra_args: Vec::new(),
            preprocessor: None,
        }
    }

    pub fn with_args(mut self, args: impl IntoIterator<Item = String>) -> Self {
        self.extra_args.extend(args);
        self
    }

    pub fn with_preprocessor(mut self, preprocessor: Box<dyn Preprocessor>) -> Self {
        self.preprocessor = Some(preprocessor);
        self
    }
}

impl SatBackend for ExternalBackend {
    fn name(&self) -> String {
        format!("external:{}", self.path.display())
    }

    fn solve(
        &mut self,
        formula: &CnfFormula,
        limits: &SolveLimits,
    ) -> Result<SolverResult, BackendError> {
        let started = Instant::now();
        let processed;
        let effective = match &self.preprocessor {
            Some(p) => {
                processed = p.simplify(formula);
                &processed
            }
            None => formula,
        };

        let dir = tempfile::tempdir()?;
        let cnf_path = dir.path().join("instance.cnf");
        {
            let mut sink = BufWriter::new(File::create(&cnf_path)?);
            emit_dimacs(effective, None, &mut sink)?;
        }
        let stdout_path = dir.path().join("stdout.log");
        let stderr_path = dir.path().join("stderr.log");
        let mut child = Command::new(&self.path)
            .args(&self.extra_args)
            .arg(&cnf_path)
            .stdin(Stdio::null())
            .stdout(File::create(&stdout_path)?)
            .stderr(File::create(&stderr_path)?)
            .spawn()
            .map_err(|source| BackendError::Spawn {
                path: self.path.clone(),
                source,
            })?;

        let exit = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if let Some(wall) = limits.wall {
                if started.elapsed() >= wall {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let stats = SolverStats {
            wall: started.elapsed(),
            ..SolverStats::default()
        };
        let Some(exit) = exit else {
            // wall limit fired
            return Ok(SolverResult {
                status: SolveStatus::Unknown,
                model: None,
                stats,
            });
        };
        if !matches!(exit.code(), Some(0 | 10 | 20)) {
            let stderr = std::fs::read_to_string(&stderr_path).unwrap_or_default();
            return Err(BackendError::UnexpectedExit {
                code: exit.code(),
                stderr: stderr.chars().take(400).collect(),
            });
        }
        let stdout = std::fs::read_to_string(&stdout_path)?;
        let (status, model) = parse_solver_output(&stdout, formula)?;
        Ok(SolverResult {
            status,
            model,
            stats,
        })
    }
}

fn parse_solver_output(
    output: &str,
    formula: &CnfFormula,
) -> Result<(SolveStatus, Option<Model>), BackendError> {
    let mut status = None;
    let mut literals: Vec<i64> = Vec::new();
    let mut terminated = false;
    for line in output.lines() {
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(match rest.trim() {
                "SATISFIABLE" => SolveStatus::Satisfiable,
                "UNSATISFIABLE" => SolveStatus::Unsatisfiable,
                "UNKNOWN" | "INDETERMINATE" | "INDET" => SolveStatus::Unknown,
                other => {
                    return Err(BackendError::MalformedOutput(format!(
                        "unrecognized status `{other}`"
                    )))
                }
            });
        } else if line == "v" || line.starts_with("v ") {
            for token in line[1..].split_whitespace() {
                let value: i64 = token.parse().map_err(|_| {
                    BackendError::MalformedOutput(format!("bad literal `{token}`"))
                })?;
                if value == 0 {
                    terminated = true;
                } else {
                    literals.push(value);
                }
            }
        }
    }
    let Some(status) = status else {
        return Err(BackendError::MissingStatusLine);
    };
    if status != SolveStatus::Satisfiable {
        return Ok((status, None));
    }
    if !terminated {
        return Err(BackendError::TruncatedModel);
    }
    let mut values = vec![false; formula.num_vars() as usize + 1];
    for lit in literals {
        let var = lit.unsigned_abs();
        if var > formula.num_vars() as u64 {
            return Err(BackendError::LiteralOutOfRange { var });
        }
        values[var as usize] = lit > 0;
    }
    if let Some(clause) = formula.first_falsified(|v| values[v as usize]) {
        return Err(BackendError::InvalidModel { clause });
    }
    Ok((SolveStatus::Satisfiable, Some(Model { values })))
}
