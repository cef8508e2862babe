//! One scenario per process: each subcommand assembles a scenario config
//! (from flags or a config file), hands it to the core runner, prints the
//! JSON report to stdout, and exits 0 only when every embedded assertion
//! passed. Exit codes: 1 numerical assertion failure, 2 schema violation,
//! 3 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avqslab_core::scenario::{self, ScenarioConfig};
use avqslab_core::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(
    name = "avqslab",
    version,
    about = "Workbench for one-way distillation and merging over compound and varying sources",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropies and information measures of a density matrix
    Entropy(EntropyArgs),
    /// One-shot distillation rate of an instrument on a bipartite state
    DistillRate(DistillRateArgs),
    /// Search for the instrument maximizing the worst-case mixture rate
    Optimize(OptimizeArgs),
    /// Isotypic decomposition of l copies of a d-level system
    Schur(SchurArgs),
    /// Permutation-average a fidelity table and certify the i.i.d. floor
    Robustify(RobustifyArgs),
    /// Replace the permutation orbit by a small seeded sample of it
    Derandomize(DerandomizeArgs),
    /// Source family whose varying merging cost exceeds the compound one
    Counterexample(CounterexampleArgs),
    /// Schema-check a scenario config without running it
    Validate(ValidateArgs),
}

/// Flags shared by every run subcommand.
#[derive(Args)]
struct Common {
    /// Full scenario config file; replaces the parameter flags
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed recorded in the report and used by any sampling step
    #[arg(long)]
    seed: Option<u64>,
    /// Override a named tolerance, e.g. --tol identity=1e-8 (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write tabular results as CSV (columns s_sequence,value)
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    /// Density-matrix JSON file
    #[arg(long, value_name = "FILE", required_unless_present = "config", conflicts_with = "config")]
    state: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DistillRateArgs {
    /// Density-matrix JSON file (first factor is the measured side)
    #[arg(long, value_name = "FILE", required_unless_present = "config", conflicts_with = "config")]
    state: Option<PathBuf>,
    /// Instrument JSON file ({"kraus": [...]} or {"raw": [...]})
    #[arg(long, value_name = "FILE", required_unless_present = "config", conflicts_with = "config")]
    instrument: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OptimizeArgs {
    /// State-set JSON file (array of density matrices)
    #[arg(long, value_name = "FILE", required_unless_present = "config", conflicts_with = "config")]
    set: Option<PathBuf>,
    /// Copies acted on jointly
    #[arg(long, conflicts_with = "config")]
    k: Option<u64>,
    /// Instrument branches
    #[arg(long, conflicts_with = "config")]
    branches: Option<u64>,
    /// Independent optimizer restarts
    #[arg(long, conflicts_with = "config")]
    restarts: Option<u64>,
    /// Iterations per restart
    #[arg(long, conflicts_with = "config")]
    iters: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SchurArgs {
    /// Local dimension
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    d: Option<u64>,
    /// Number of copies
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    l: Option<u64>,
    /// Single-copy spectrum for per-frame masses, e.g. --spectrum 0.9,0.1
    #[arg(long, value_name = "P0,P1,...", conflicts_with = "config")]
    spectrum: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RobustifyArgs {
    /// Number of source states
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    set_size: Option<u64>,
    /// Blocklength
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    l: Option<u64>,
    /// Fidelity table JSON file (lexicographic sequence order)
    #[arg(long, value_name = "FILE", required_unless_present = "config", conflicts_with = "config")]
    table: Option<PathBuf>,
    /// i.i.d. slack level; defaults to the exact worst type slack
    #[arg(long, conflicts_with = "config")]
    gamma: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DerandomizeArgs {
    /// Number of source states
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    set_size: Option<u64>,
    /// Blocklength
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    l: Option<u64>,
    /// Permutations drawn per attempt
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    samples: Option<u64>,
    /// Failure level the sample must certify
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    nu: Option<f64>,
    /// Leading-pair fidelity for mismatched sources (builds the table)
    #[arg(long, conflicts_with_all = ["config", "table"])]
    mismatch: Option<f64>,
    /// Failure table JSON file (lexicographic sequence order)
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    table: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Family size
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    n: Option<u64>,
    /// Base density-matrix JSON file (defaults to a Bell pair)
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    base: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario config file to check
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(scenario::exit_code(&err) as u8)
        }
    }
}

fn execute(command: Command) -> Result<u8> {
    init_thread_pool()?;
    match command {
        Command::Entropy(a) => {
            let cfg = build_config("entropy", &a.common, [("state", a.state)], [])?;
            run_and_render(&cfg, &a.common)
        }
        Command::DistillRate(a) => {
            let cfg = build_config(
                "distill-rate",
                &a.common,
                [("state", a.state), ("instrument", a.instrument)],
                [],
            )?;
            run_and_render(&cfg, &a.common)
        }
        Command::Optimize(a) => {
            let params = [
                ("k", a.k.map(Value::from)),
                ("branches", a.branches.map(Value::from)),
                ("restarts", a.restarts.map(Value::from)),
                ("iters", a.iters.map(Value::from)),
            ];
            let cfg = build_config("optimize", &a.common, [("set", a.set)], params)?;
            run_and_render(&cfg, &a.common)
        }
        Command::Schur(a) => {
            let spectrum = a.spectrum.map(|s| parse_float_list(&s)).transpose()?;
            let params = [
                ("d", a.d.map(Value::from)),
                ("l", a.l.map(Value::from)),
                ("spectrum", spectrum),
            ];
            let cfg = build_config("schur", &a.common, [], params)?;
            run_and_render(&cfg, &a.common)
        }
        Command::Robustify(a) => {
            let params = [
                ("set_size", a.set_size.map(Value::from)),
                ("l", a.l.map(Value::from)),
                ("gamma", a.gamma.map(Value::from)),
            ];
            let cfg = build_config("robustify", &a.common, [("table", a.table)], params)?;
            run_and_render(&cfg, &a.common)
        }
        Command::Derandomize(a) => {
            let params = [
                ("set_size", a.set_size.map(Value::from)),
                ("l", a.l.map(Value::from)),
                ("samples", a.samples.map(Value::from)),
                ("nu", a.nu.map(Value::from)),
                ("mismatch", a.mismatch.map(Value::from)),
            ];
            let cfg = build_config("derandomize", &a.common, [("table", a.table)], params)?;
            run_and_render(&cfg, &a.common)
        }
        Command::Counterexample(a) => {
            let params = [("n", a.n.map(Value::from))];
            let cfg = build_config("counterexample", &a.common, [("base", a.base)], params)?;
            run_and_render(&cfg, &a.common)
        }
        Command::Validate(a) => validate_file(&a.file),
    }
}

/// Honor AVQSLAB_THREADS as a cap on worker threads. Unset means the
/// default pool; anything unparseable is rejected up front.
fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("AVQSLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::domain(format!("AVQSLAB_THREADS = {raw:?} is not a positive integer")))?;
    // A second initialization (e.g. in tests) is harmless: the cap already
    // stuck the first time.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Assemble the scenario config for one subcommand: either load --config
/// verbatim (checking it names this command) or collect file inputs and
/// inline parameters from the flags.
fn build_config<const I: usize, const P: usize>(
    command: &str,
    common: &Common,
    inputs: [(&str, Option<PathBuf>); I],
    params: [(&str, Option<Value>); P],
) -> Result<ScenarioConfig> {
    let mut cfg = if let Some(path) = &common.config {
        let cfg = scenario::parse_config(&read_file(path)?)?;
        if cfg.command != command {
            return Err(Error::domain(format!(
                "config file runs {:?} but was passed to the {command:?} subcommand",
                cfg.command
            )));
        }
        cfg
    } else {
        let mut input_map = std::collections::BTreeMap::new();
        for (key, path) in inputs {
            if let Some(path) = path {
                input_map.insert(key.to_string(), path.to_string_lossy().into_owned());
            }
        }
        let mut param_map = Map::new();
        for (key, value) in params {
            if let Some(value) = value {
                param_map.insert(key.to_string(), value);
            }
        }
        ScenarioConfig {
            command: command.to_string(),
            inputs: (!input_map.is_empty()).then_some(input_map),
            params: param_map,
            seed: None,
            tolerances: None,
        }
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if !common.tolerances.is_empty() {
        let mut tols = cfg.tolerances.take().unwrap_or_default();
        for spec in &common.tolerances {
            let (name, value) = spec
                .split_once('=')
                .ok_or_else(|| Error::domain(format!("--tol expects NAME=VALUE, got {spec:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| Error::domain(format!("--tol {name}: {value:?} is not a number")))?;
            tols.insert(name.to_string(), value);
        }
        cfg.tolerances = Some(tols);
    }
    Ok(cfg)
}

fn parse_float_list(raw: &str) -> Result<Value> {
    let mut out = Vec::new();
    for piece in raw.split(',') {
        let x: f64 = piece
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("spectrum entry {piece:?} is not a number")))?;
        out.push(Value::from(x));
    }
    Ok(Value::Array(out))
}

fn run_and_render(cfg: &ScenarioConfig, common: &Common) -> Result<u8> {
    let report = scenario::run(cfg)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    println!("{text}");
    if let Some(path) = &common.out {
        fs::write(path, &text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &common.csv {
        write_csv(path, &report.results)?;
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}

/// Tabular results only: rows of (s_sequence, value).
fn write_csv(path: &Path, results: &Value) -> Result<()> {
    let rows = results
        .get("table")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::domain("this command has no tabular results to export as CSV"))?;
    let io_err = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer.write_record(["s_sequence", "value"]).map_err(io_err)?;
    for row in rows {
        let seq = row
            .get("s_sequence")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Serialization("table row without s_sequence".into()))?;
        let value = row
            .get("value")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Serialization("table row without numeric value".into()))?;
        writer
            .write_record([seq, &format!("{value}")])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Schema check only. Prints a JSON diagnostics array: empty when the file
/// is a well-formed config in range, one entry naming the problem when not.
fn validate_file(path: &Path) -> Result<u8> {
    let text = read_file(path)?;
    let diagnostics = match scenario::parse_config(&text).and_then(|cfg| scenario::validate(&cfg)) {
        Ok(()) => Vec::new(),
        Err(err) => {
            let code = scenario::exit_code(&err);
            let entry = serde_json::json!({ "error": err.to_string() });
            println!("{}", serde_json::to_string_pretty(&Value::Array(vec![entry])).unwrap());
            return Ok(code as u8);
        }
    };
    println!("{}", Value::Array(diagnostics));
    Ok(0)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
