//! `sortnet` — verify, generate, encode, and synthesize small-depth sorting
//! networks.
//!
//! Exit codes: 0 success / sorts-all, 1 negative result (counterexample or
//! infeasible), 2 usage or parse error, 3 resource limit. The `solve-dimacs`
//! utility follows SAT-solver conventions instead (10 SAT, 20 UNSAT,
//! 0 unknown).

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sortnet_core::backend::{EmbeddedBackend, ExternalBackend, SatBackend, SolveLimits, SolveStatus};
use sortnet_core::cegis::{synthesize, SynthesisConfig, SynthesisStatus};
use sortnet_core::encode::{
    add_reachability, add_sortedness, emit_dimacs, encode_structure, parse_dimacs,
};
use sortnet_core::generators::{batcher_oddeven_sort, known_network};
use sortnet_core::network::{BitVector, Network};
use sortnet_core::prefix::{canonical_first_layer, figure_prefix, poset_prefix};
use sortnet_core::verify::{family_vectors, verify_01_with, InputFamily, Verdict, VerifyOptions};

const EXIT_OK: i32 = 0;
const EXIT_NEGATIVE: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_LIMIT: i32 = 3;

#[derive(Parser)]
#[command(name = "sortnet", version, about = "Sorting-network toolkit")]
struct Cli {
    /// TOML config file; recognized keys: solver (path), threads,
    /// exhaustive_limit. Flags win over the config file, which wins over the
    /// SORTNET_SOLVER environment variable.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a network sorts; `-` reads the network from stdin
    Verify(VerifyArgs),
    /// Search for a network of the requested depth
    Synth(SynthArgs),
    /// Write the CNF for "a depth-d network with this prefix sorts these inputs"
    EmitCnf(EmitCnfArgs),
    /// Print a constructed or published network
    #[command(subcommand)]
    Gen(GenCommand),
    /// Solve a DIMACS CNF file and answer in s/v-line convention
    SolveDimacs(SolveDimacsArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Network file (text or JSON), or `-` for stdin
    network: String,
    /// Input family: `all` (default), `windowed:K`, or a file of bitstrings
    #[arg(long, default_value = "all")]
    family: String,
    /// Machine-readable report on stdout
    #[arg(long)]
    json: bool,
    /// Worker threads for the exhaustive scan (default: available cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Refuse exhaustive checks beyond this many channels
    #[arg(long)]
    exhaustive_limit: Option<u32>,
}

#[derive(Args)]
struct SynthArgs {
    /// Channel count
    #[arg(long)]
    n: usize,
    /// Target depth
    #[arg(long)]
    depth: usize,
    /// Fixed opening layers: `canonical`, `fig2-3layer`, `fig3-4layer`,
    /// `poset<SIZE>@<start>[,<start>...]`, or a network file
    #[arg(long)]
    prefix: Option<String>,
    /// Drop the input-to-output influence constraints
    #[arg(long)]
    no_reachability: bool,
    /// Inputs registered before the first solver call: `windowed:K`,
    /// `empty`, `all`, or a file of bitstrings
    #[arg(long, default_value = "windowed:2")]
    seed_inputs: String,
    /// Counterexample family: `all` (default), `windowed:K`, or a file
    #[arg(long, default_value = "all")]
    family: String,
    /// Wall-clock budget for the whole run, in seconds
    #[arg(long)]
    timeout: Option<f64>,
    /// Wall-clock budget per solver call, in seconds
    #[arg(long)]
    solve_timeout: Option<f64>,
    /// Recorded for the run; the embedded solver is deterministic regardless
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-iteration trace as JSON lines
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,
    /// Write the network here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Machine-readable outcome on stdout
    #[arg(long)]
    json: bool,
    /// SAT backend: `embedded` or a path to a DIMACS solver binary
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    exhaustive_limit: Option<u32>,
}

#[derive(Args)]
struct EmitCnfArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    depth: usize,
    /// As in `synth --prefix`
    #[arg(long)]
    prefix: Option<String>,
    /// Inputs to require sorted: `all`, `windowed:K`, or a file of bitstrings
    #[arg(long)]
    inputs: Option<String>,
    /// Add the input-to-output influence constraints
    #[arg(long)]
    reachability: bool,
    /// Output file (default stdout)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Odd-even mergesort baseline
    Batcher {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        json: bool,
    },
    /// A published network: paper17d10, paper20d11, or paper19d11
    Known {
        name: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct SolveDimacsArgs {
    /// DIMACS CNF file, or `-` for stdin
    file: String,
    /// Wall-clock budget in seconds
    #[arg(long)]
    timeout: Option<f64>,
    /// Conflict budget
    #[arg(long)]
    conflicts: Option<u64>,
    /// `embedded` or a path to another solver to delegate to
    #[arg(long)]
    solver: Option<String>,
}

/// Settings read from the optional TOML config file.
#[derive(Default)]
struct FileConfig {
    solver: Option<String>,
    threads: Option<usize>,
    exhaustive_limit: Option<u32>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let value: toml::Table = text
        .parse()
        .with_context(|| format!("invalid TOML in {}", path.display()))?;
    let mut config = FileConfig::default();
    if let Some(solver) = value.get("solver") {
        config.solver = Some(
            solver
                .as_str()
                .ok_or_else(|| anyhow!("config key `solver` must be a string"))?
                .to_string(),
        );
    }
    if let Some(threads) = value.get("threads") {
        config.threads = Some(
            threads
                .as_integer()
                .ok_or_else(|| anyhow!("config key `threads` must be an integer"))?
                as usize,
        );
    }
    if let Some(limit) = value.get("exhaustive_limit") {
        config.exhaustive_limit = Some(
            limit
                .as_integer()
                .ok_or_else(|| anyhow!("config key `exhaustive_limit` must be an integer"))?
                as u32,
        );
    }
    Ok(config)
}

fn main() {
    // dying quietly on a closed pipe is what `sortnet ... | head` expects
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            EXIT_USAGE
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Verify(args) => cmd_verify(args, &config),
        Command::Synth(args) => cmd_synth(args, &config),
        Command::EmitCnf(args) => cmd_emit_cnf(args),
        Command::Gen(args) => cmd_gen(args),
        Command::SolveDimacs(args) => cmd_solve_dimacs(args, &config),
    }
}

fn read_input(spec: &str) -> Result<String> {
    if spec == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
        Ok(text)
    } else {
        std::fs::read_to_string(spec).with_context(|| format!("cannot read {spec}"))
    }
}

/// Text format unless the payload looks like JSON.
fn parse_network(text: &str) -> Result<Network> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).context("parsing JSON network")
    } else {
        text.parse::<Network>().context("parsing network")
    }
}

fn read_network(spec: &str) -> Result<Network> {
    parse_network(&read_input(spec)?)
}

fn parse_family(spec: &str, n: usize) -> Result<InputFamily> {
    if spec == "all" {
        return Ok(InputFamily::AllBinary);
    }
    if let Some(k) = spec.strip_prefix("windowed:") {
        let max_window: usize = k
            .parse()
            .with_context(|| format!("invalid window bound `{k}`"))?;
        return Ok(InputFamily::Windowed { max_window });
    }
    let text = std::fs::read_to_string(spec).with_context(|| {
        format!("family `{spec}` is not `all`, `windowed:K`, or a readable file")
    })?;
    let mut vectors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: BitVector = line.parse().map_err(|e| anyhow!("{spec}:{}: {e}", idx + 1))?;
        if v.width() != n {
            bail!(
                "{spec}:{}: vector has width {}, expected {n}",
                idx + 1,
                v.width()
            );
        }
        vectors.push(v);
    }
    Ok(InputFamily::Explicit(vectors))
}

fn parse_prefix(spec: &str, n: usize) -> Result<Network> {
    let prefix = match spec {
        "canonical" => Network::new(n, vec![canonical_first_layer(n)]),
        "fig2-3layer" | "fig3-4layer" => figure_prefix(spec)?,
        other if other.starts_with("poset") => {
            let rest = &other["poset".len()..];
            let (size, starts) = rest
                .split_once('@')
                .ok_or_else(|| anyhow!("expected poset<SIZE>@<start>[,<start>...]"))?;
            let size: usize = size.parse().context("poset block size")?;
            let starts: Vec<usize> = starts
                .split(',')
                .map(|s| s.trim().parse::<usize>().context("poset start channel"))
                .collect::<Result<_>>()?;
            poset_prefix(size, n, &starts)?
        }
        path => read_network(path)?,
    };
    if prefix.n() != n {
        bail!("prefix has {} channels, expected {n}", prefix.n());
    }
    Ok(prefix)
}

fn verify_options(
    threads: Option<usize>,
    exhaustive_limit: Option<u32>,
    config: &FileConfig,
) -> VerifyOptions {
    let mut options = VerifyOptions::default();
    if let Some(threads) = threads.or(config.threads) {
        options.threads = threads.max(1);
    }
    if let Some(limit) = exhaustive_limit.or(config.exhaustive_limit) {
        options.exhaustive_limit = limit;
    }
    options
}

/// `embedded`, or a solver command line whose first word is the binary (the
/// DIMACS file is appended as the last argument).
fn resolve_backend(flag: Option<&str>, config: &FileConfig) -> Box<dyn SatBackend> {
    let choice = flag
        .map(str::to_string)
        .or_else(|| config.solver.clone())
        .or_else(|| std::env::var("SORTNET_SOLVER").ok());
    match choice.as_deref() {
        None | Some("embedded") => Box::new(EmbeddedBackend::new()),
        Some(command) => {
            let mut words = command.split_whitespace();
            let path = words.next().expect("non-empty solver command");
            Box::new(ExternalBackend::new(path).with_args(words.map(str::to_string)))
        }
    }
}

fn cmd_verify(args: VerifyArgs, config: &FileConfig) -> Result<i32> {
    let network = read_network(&args.network)?;
    let options = verify_options(args.threads, args.exhaustive_limit, config);
    let family = parse_family(&args.family, network.n())?;
    let started = Instant::now();

    if matches!(family, InputFamily::AllBinary) {
        let verdict = verify_01_with(&network, &options)?;
        let wall = started.elapsed();
        if args.json {
            println!("{}", serde_json::to_string(&verdict)?);
        } else {
            match &verdict {
                Verdict::SortsAll { inputs_checked } => {
                    println!("{inputs_checked} inputs, sorts-all");
                }
                Verdict::Counterexample {
                    witness,
                    inputs_checked,
                } => {
                    println!("{inputs_checked} inputs, counterexample");
                    println!("witness: {witness}");
                }
            }
            println!("wall time: {} ms", wall.as_millis());
        }
        return Ok(if verdict.sorts_all() {
            EXIT_OK
        } else {
            EXIT_NEGATIVE
        });
    }

    // family sweep: can only certify the absence of counterexamples inside
    // the family, never sorts-all
    let mut checked = 0u64;
    let mut witness = None;
    for x in family_vectors(network.n(), &family) {
        checked += 1;
        if !network.evaluate(&x).is_sorted() {
            witness = Some(x);
            break;
        }
    }
    let wall = started.elapsed();
    if args.json {
        let report = match &witness {
            Some(w) => json!({
                "status": "counterexample",
                "witness": w.to_string(),
                "inputs_checked": checked,
            }),
            None => json!({
                "status": "no-counterexample",
                "inputs_checked": checked,
            }),
        };
        println!("{report}");
    } else {
        match &witness {
            Some(w) => {
                println!("{checked} inputs, counterexample");
                println!("witness: {w}");
            }
            None => println!("{checked} inputs, no counterexample in family"),
        }
        println!("wall time: {} ms", wall.as_millis());
    }
    Ok(if witness.is_some() {
        EXIT_NEGATIVE
    } else {
        EXIT_OK
    })
}

fn seed_family(spec: &str, n: usize) -> Result<InputFamily> {
    match spec {
        "empty" => Ok(InputFamily::Explicit(Vec::new())),
        other => parse_family(other, n),
    }
}

fn cmd_synth(args: SynthArgs, config: &FileConfig) -> Result<i32> {
    let mut synth = SynthesisConfig::new(args.n, args.depth);
    if let Some(prefix) = args.prefix.as_deref() {
        synth.prefix = parse_prefix(prefix, args.n)?;
    }
    synth.use_reachability = !args.no_reachability;
    synth.seed_inputs = seed_family(&args.seed_inputs, args.n)?;
    synth.counterexample_family = parse_family(&args.family, args.n)?;
    synth.global_wall = args.timeout.map(Duration::from_secs_f64);
    synth.solve_limits = SolveLimits {
        wall: args.solve_timeout.map(Duration::from_secs_f64),
        conflicts: None,
    };
    synth.seed = args.seed;
    synth.verify = verify_options(args.threads, args.exhaustive_limit, config);

    let mut backend = resolve_backend(args.solver.as_deref(), config);
    let started = Instant::now();
    let outcome = synthesize(&synth, backend.as_mut())?;
    let wall = started.elapsed();

    if let Some(path) = &args.trace_out {
        let mut sink = BufWriter::new(
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
        );
        for record in &outcome.trace {
            writeln!(sink, "{}", serde_json::to_string(record)?)?;
        }
    }

    eprintln!(
        "{} iterations, {} ms, backend {}",
        outcome.trace.len(),
        wall.as_millis(),
        backend.name()
    );

    if args.json {
        let network_json = outcome
            .network
            .as_ref()
            .map(|n| serde_json::to_value(n).expect("network serializes"));
        println!(
            "{}",
            json!({
                "status": outcome.status,
                "network": network_json,
                "iterations": outcome.trace.len(),
                "wall_ms": wall.as_millis() as u64,
            })
        );
    }

    match outcome.status {
        SynthesisStatus::NetworkFound => {
            let network = outcome.network.expect("network accompanies success");
            if let Some(path) = &args.out {
                std::fs::write(path, network.to_string())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            } else if !args.json {
                print!("{network}");
            }
            Ok(EXIT_OK)
        }
        SynthesisStatus::Infeasible => {
            eprintln!(
                "infeasible: no depth-{} network on {} channels extends the prefix",
                args.depth, args.n
            );
            Ok(EXIT_NEGATIVE)
        }
        SynthesisStatus::ResourceLimit => {
            eprintln!("resource limit reached before a decision");
            Ok(EXIT_LIMIT)
        }
    }
}

fn cmd_emit_cnf(args: EmitCnfArgs) -> Result<i32> {
    let prefix = match args.prefix.as_deref() {
        Some(spec) => parse_prefix(spec, args.n)?,
        None => Network::empty(args.n),
    };
    let (mut formula, mut map) = encode_structure(args.n, args.depth, &prefix)?;
    if args.reachability {
        add_reachability(&mut formula, &mut map);
    }
    if let Some(inputs) = args.inputs.as_deref() {
        let family = parse_family(inputs, args.n)?;
        for x in family_vectors(args.n, &family) {
            add_sortedness(&mut formula, &mut map, &x)?;
        }
    }
    match &args.out {
        Some(path) => {
            let mut sink = BufWriter::new(
                File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
            );
            emit_dimacs(&formula, Some(&map), &mut sink)?;
        }
        None => {
            let stdout = io::stdout();
            let mut sink = BufWriter::new(stdout.lock());
            emit_dimacs(&formula, Some(&map), &mut sink)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(command: GenCommand) -> Result<i32> {
    let (network, json) = match command {
        GenCommand::Batcher { n, json } => (batcher_oddeven_sort(n), json),
        GenCommand::Known { name, json } => (known_network(&name)?, json),
    };
    if json {
        println!("{}", serde_json::to_string(&network)?);
    } else {
        print!("{network}");
    }
    Ok(EXIT_OK)
}

fn cmd_solve_dimacs(args: SolveDimacsArgs, config: &FileConfig) -> Result<i32> {
    let text = read_input(&args.file)?;
    let formula = parse_dimacs(text.as_bytes())?;
    let limits = SolveLimits {
        wall: args.timeout.map(Duration::from_secs_f64),
        conflicts: args.conflicts,
    };
    let mut backend = resolve_backend(args.solver.as_deref(), config);
    let result = backend.solve(&formula, &limits)?;
    println!("c {}", backend.name());
    println!(
        "c conflicts {} decisions {} propagations {} wall_ms {}",
        result.stats.conflicts,
        result.stats.decisions,
        result.stats.propagations,
        result.stats.wall.as_millis()
    );
    match result.status {
        SolveStatus::Satisfiable => {
            println!("s SATISFIABLE");
            let model = result.model.expect("model accompanies sat");
            let mut line = String::from("v");
            for var in 1..=formula.num_vars() {
                let lit = if model.value(var) {
                    format!(" {var}")
                } else {
                    format!(" -{var}")
                };
                if line.len() + lit.len() > 76 {
                    println!("{line}");
                    line = String::from("v");
                }
                line.push_str(&lit);
            }
            line.push_str(" 0");
            println!("{line}");
            Ok(10)
        }
        SolveStatus::Unsatisfiable => {
            println!("s UNSATISFIABLE");
            Ok(20)
        }
        SolveStatus::Unknown => {
            println!("s UNKNOWN");
            Ok(EXIT_OK)
        }
    }
}
