//! The `ucheck` command line.
//!
//! ```text
//! ucheck check TRACE [--spec NAME] [--criteria EC,SEC,...] [--budget N] [--omega-k K]
//! ucheck simulate [--scenario FILE | --processes N --ops N] [--algo A] [--seed S]
//!                 [--fifo | --no-fifo] [--check CRITERIA] [--out FILE]
//! ucheck fixtures list
//! ucheck fixtures emit NAME|all [--out DIR]
//! ```
//!
//! Everything written to stdout is JSON; errors go to stderr. Exit codes:
//! 0 when every requested criterion holds, 1 when one fails, 2 when one is
//! undecided within the budget, 3 on an input error.

pub mod trace;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::adt::{AdtSpec, Support};
use crate::criteria::{check, CheckConfig, Criterion, Verdict};
use crate::fixtures;
use crate::history::{History, DEFAULT_LINEARIZATION_BUDGET};
use crate::simnet::{self, Algo, RunRecord, Scenario};

use trace::TraceFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Verdicts of one `check` invocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub schema_version: u32,
    pub spec: String,
    pub budget: u64,
    pub omega_k: usize,
    pub verdicts: Vec<Verdict>,
}

impl VerdictReport {
    /// 2 if any verdict is undecided, else 1 if any fails, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.verdicts.iter().any(|v| !v.decided) {
            EXIT_UNDECIDED
        } else if self.verdicts.iter().any(|v| !v.holds) {
            EXIT_FAILS
        } else {
            EXIT_OK
        }
    }
}

/// Runs the requested checkers, in parallel, in the order given.
pub fn check_all(
    h: &History,
    spec: &dyn AdtSpec,
    criteria: &[Criterion],
    cfg: &CheckConfig,
) -> Result<VerdictReport, crate::criteria::CheckError> {
    let verdicts = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|c| s.spawn(move || check(*c, h, spec, cfg))).collect();
        handles
            .into_iter()
            .map(|t| t.join().expect("checker thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(VerdictReport {
        schema_version: trace::SCHEMA_VERSION,
        spec: spec.name().to_string(),
        budget: cfg.budget,
        omega_k: cfg.omega_k,
        verdicts,
    })
}

/// The criteria checked when none are requested: all of them, except the
/// insert-wins one for types other than sets.
pub fn default_criteria(spec: &str) -> Vec<Criterion> {
    Criterion::ALL
        .into_iter()
        .filter(|c| *c != Criterion::IwSec || spec == "set")
        .collect()
}

#[derive(Parser, Debug)]
#[command(name = "ucheck", version, about = "Check histories against consistency criteria and simulate replicated objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a trace (or a simulation record) against consistency criteria.
    Check(CheckArgs),
    /// Run a simulation and print its record.
    Simulate(SimulateArgs),
    /// List or write the bundled fixtures.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Args, Debug)]
struct CheckOpts {
    /// Maximum search nodes per checker.
    #[arg(long, default_value_t = DEFAULT_LINEARIZATION_BUDGET)]
    budget: u64,
    /// Copies materialized per repeating query where a checker expands them.
    #[arg(long = "omega-k", default_value_t = 2)]
    omega_k: usize,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Trace file, or a record written by `simulate`.
    trace: PathBuf,
    /// Override the type named in the trace.
    #[arg(long)]
    spec: Option<String>,
    /// Comma-separated criteria (EC, SEC, PC, UC, SUC, IW-SEC) or `all`.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<String>,
    #[command(flatten)]
    opts: CheckOpts,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario file; without it a random scenario is generated.
    #[arg(long, conflicts_with_all = ["processes", "ops"])]
    scenario: Option<PathBuf>,
    /// One of generic-set, generic-gset, generic-memory, lww-memory, or-set.
    #[arg(long, default_value = "generic-set")]
    algo: Algo,
    /// Processes of a random scenario.
    #[arg(long)]
    processes: Option<u32>,
    /// Total operations of a random scenario, dealt to processes in turn.
    #[arg(long)]
    ops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep per-link message order (the default).
    #[arg(long, overrides_with = "no_fifo")]
    fifo: bool,
    /// Let messages on a link overtake each other.
    #[arg(long = "no-fifo", overrides_with = "fifo")]
    no_fifo: bool,
    /// Check the recorded history against these criteria.
    #[arg(long, value_delimiter = ',')]
    check: Vec<String>,
    /// Write the record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: CheckOpts,
}

#[derive(Subcommand, Debug)]
enum FixturesCommand {
    /// Print the names of the bundled histories.
    List,
    /// Print or write a bundled trace or scenario.
    Emit {
        /// A history name, `fig1b-scenario`, or `all`.
        name: String,
        /// Directory to write `NAME.json` files into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Output of `simulate`: the record, plus verdicts when `--check` is given.
#[derive(Serialize)]
struct SimulateOutput<'a> {
    #[serde(flatten)]
    record: &'a RunRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<VerdictReport>,
}

/// Input errors, reported on stderr with exit code 3.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Parses `args` (program name first), runs the command and returns its
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Check(args) => cmd_check(args, out),
        Command::Simulate(args) => cmd_simulate(args, out),
        Command::Fixtures(cmd) => cmd_fixtures(cmd, out),
    };
    match result {
        Ok(code) => code,
        Err(InputError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn parse_criteria(names: &[String], spec: &str) -> Result<Vec<Criterion>, InputError> {
    if names.is_empty() || names.iter().any(|n| n.eq_ignore_ascii_case("all")) {
        return Ok(default_criteria(spec));
    }
    names.iter().map(|n| n.parse::<Criterion>().map_err(InputError)).collect()
}

fn config(opts: &CheckOpts) -> Result<CheckConfig, InputError> {
    if opts.omega_k == 0 {
        return Err(InputError("--omega-k must be at least 1".into()));
    }
    Ok(CheckConfig {
        budget: opts.budget,
        omega_k: opts.omega_k,
    })
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Reads a trace, or the history of a run record.
fn load_trace(path: &Path) -> Result<TraceFile, InputError> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let trace_text = match value.get("history") {
        Some(h) if value.get("deliveries").is_some() => h.to_string(),
        _ => text,
    };
    TraceFile::parse(&trace_text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, json: &str) -> Result<(), InputError> {
    out.write_all(json.as_bytes())?;
    if !json.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn cmd_check(args: CheckArgs, out: &mut dyn Write) -> Result<i32, InputError> {
    let mut trace = load_trace(&args.trace)?;
    if let Some(spec) = args.spec {
        trace.spec = spec;
    }
    let spec: Arc<dyn AdtSpec> = trace.spec()?;
    let h = trace.to_history(&*spec)?;
    let criteria = parse_criteria(&args.criteria, &trace.spec)?;
    let report = check_all(&h, &*spec, &criteria, &config(&args.opts)?)?;
    emit(out, &serde_json::to_string_pretty(&report)?)?;
    Ok(report.exit_code())
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<i32, InputError> {
    let mut sc = match &args.scenario {
        Some(path) => Scenario::parse(&read(path)?)?,
        None => Scenario::random(args.processes.unwrap_or(2), args.ops.unwrap_or(6)),
    };
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if args.fifo || args.no_fifo {
        sc.fifo = args.fifo;
    }
    let record = simnet::run(&sc, &args.algo)?;
    let report = if args.check.is_empty() {
        None
    } else {
        let spec = record.history.spec()?;
        let h = record.history()?;
        let criteria = parse_criteria(&args.check, &record.history.spec)?;
        Some(check_all(&h, &*spec, &criteria, &config(&args.opts)?)?)
    };
    let code = report.as_ref().map_or(EXIT_OK, VerdictReport::exit_code);
    match &args.out {
        Some(path) => {
            std::fs::write(path, record.to_json()).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            if let Some(report) = &report {
                emit(out, &serde_json::to_string_pretty(report)?)?;
            }
        }
        None => emit(out, &serde_json::to_string_pretty(&SimulateOutput { record: &record, report })?)?,
    }
    Ok(code)
}

/// The bundled trace of a history fixture.
pub fn fixture_trace(name: &str) -> Option<TraceFile> {
    let h = fixtures::by_name(name)?;
    Some(TraceFile::from_history("set", Some(Support::Values(vec![1.into(), 2.into(), 3.into()])), &h))
}

/// The file contents of a bundled fixture (history or scenario).
pub fn fixture_json(name: &str) -> Option<String> {
    fixture_trace(name)
        .map(|t| t.to_json())
        .or_else(|| fixtures::scenario_by_name(name).map(|s| s.to_json()))
}

fn cmd_fixtures(cmd: FixturesCommand, out: &mut dyn Write) -> Result<i32, InputError> {
    match cmd {
        FixturesCommand::List => emit(out, &serde_json::to_string(&fixtures::NAMES)?)?,
        FixturesCommand::Emit { name, out: dir } => {
            let names: Vec<&str> = if name == "all" {
                fixtures::NAMES.iter().chain(&fixtures::SCENARIO_NAMES).copied().collect()
            } else {
                vec![name.as_str()]
            };
            match dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let mut written = Vec::new();
                    for n in names {
                        let json = fixture_json(n).ok_or_else(|| InputError(format!("unknown fixture `{n}`")))?;
                        let path = dir.join(format!("{n}.json"));
                        std::fs::write(&path, json).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
                        written.push(path.display().to_string());
                    }
                    emit(out, &serde_json::to_string(&written)?)?;
                }
                None if names.len() == 1 => {
                    let json = fixture_json(names[0]).ok_or_else(|| InputError(format!("unknown fixture `{}`", names[0])))?;
                    emit(out, &json)?;
                }
                None => return Err(InputError("`emit all` needs --out DIR".into())),
            }
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("ucheck").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_code_precedence() {
        let v = |holds, decided| Verdict {
            criterion: Criterion::Ec,
            holds,
            decided,
            witness: None,
            diagnostics: String::new(),
            explored: 0,
        };
        let report = |verdicts| VerdictReport {
            schema_version: 1,
            spec: "set".into(),
            budget: 1,
            omega_k: 2,
            verdicts,
        };
        assert_eq!(report(vec![v(true, true)]).exit_code(), 0);
        assert_eq!(report(vec![v(true, true), v(false, true)]).exit_code(), 1);
        assert_eq!(report(vec![v(false, true), v(false, false)]).exit_code(), 2);
        assert_eq!(report(vec![]).exit_code(), 0);
    }

    #[test]
    fn default_criteria_skip_insert_wins_outside_sets() {
        assert_eq!(default_criteria("set").len(), 6);
        assert!(!default_criteria("memory").contains(&Criterion::IwSec));
    }

    #[test]
    fn usage_errors_are_input_errors() {
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["simulate", "--algo", "paxos"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["check", "/nonexistent/trace.json"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn fixtures_list_names_five() {
        let (code, out, _) = run_args(&["fixtures", "list"]);
        assert_eq!(code, 0);
        let names: Vec<String> = serde_json::from_str(&out).unwrap();
        assert_eq!(names, fixtures::NAMES);
    }
}
