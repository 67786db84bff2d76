//! Command-line front end.

mod corpus;
mod policy;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use corpus::{check_corpus, check_entry, CorpusReport, Entry, EntryReport, Expectation, Manifest};
pub use policy::{load_program, read_test_dir, LoadError, Policy, TestCase};

use crate::lang::{Loc, Stmt};
use crate::metrics::{metrics_report, LcrMode};
use crate::monitor::{run, FlowCount, InitState, Mode, Observation, Outcome, Strategy, StrategyConfig, Violation};
use crate::secrecy::{check_secrecy, theorem_suite_with, Condition, LowDomain, Verdict, SUITE_BUDGET};
use crate::trace::{analyze, read_trace, write_trace};
use crate::upgrades::{default_max_rounds, infer_upgrades, TestSuite, UpgradePlan};

pub const EXIT_OK: i32 = 0;
/// A check found a problem: theorem violations, corpus mismatches.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_STOPPED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "nanoflow",
    version,
    about = "Information-flow monitor and trace analysis for NanoJS"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program under a monitor and print its counters.
    Run {
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        policy: PathBuf,
        /// Test case whose bindings override the policy's.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Upgrade plan applied at run time.
        #[arg(long)]
        upgrades: Option<PathBuf>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        budget: Option<u64>,
        program: PathBuf,
    },
    /// Count micro flows and classify source-to-sink flows in a trace.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, requires = "sink")]
        source: Option<Loc>,
        #[arg(long, requires = "source")]
        sink: Option<Loc>,
    },
    /// Infer upgrade statements from test runs.
    InferUpgrades {
        #[arg(long)]
        policy: PathBuf,
        /// Directory of test-case files; the policy alone is one test otherwise.
        #[arg(long)]
        tests: Option<PathBuf>,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Also write the plan here.
        #[arg(long)]
        out: Option<PathBuf>,
        program: PathBuf,
    },
    /// Check explicit or observable secrecy of one run.
    CheckSecrecy {
        #[arg(long)]
        condition: Condition,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = SUITE_BUDGET)]
        budget: u64,
        program: PathBuf,
    },
    /// Label creep, sensitive branch coverage and permissiveness.
    Metrics {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        tests: Option<PathBuf>,
        #[arg(long, default_value = "pu")]
        strategy: Strategy,
        #[arg(long, default_value = "events")]
        lcr: LcrMode,
        program: PathBuf,
    },
    /// Check both secrecy theorems on generated programs.
    TheoremSuite {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value = "pu")]
        strategy: Strategy,
    },
    /// Check every program of a corpus against its manifest.
    Corpus {
        #[arg(long, default_value = "corpus")]
        dir: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(String),
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::Failed(e.to_string())
    }
}

type CmdResult = Result<i32, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Failed(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_ERROR
        }
    }
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    emit_text(out, &serde_json::to_string_pretty(value).expect("reports serialize"))
}

/// A closed stdout is not an error.
fn emit_text(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(failed(e)),
        _ => Ok(()),
    }
}

fn read_policy(path: &Path) -> Result<Policy, CliError> {
    Policy::read(path).map_err(|e| CliError::Usage(format!("policy: {e}")))
}

fn failed(e: impl ToString) -> CliError {
    CliError::Failed(e.to_string())
}

/// The policy's bindings, once per test file in `dir`, or once alone.
fn test_inits(policy: &Policy, dir: Option<&Path>) -> Result<Vec<InitState>, CliError> {
    match dir {
        None => Ok(vec![policy.init()]),
        Some(d) => Ok(read_test_dir(d)?.iter().map(|(_, t)| policy.with_test(t)).collect()),
    }
}

fn execute(command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Run {
            strategy,
            mode,
            policy,
            test,
            upgrades,
            trace_out,
            budget,
            program,
        } => {
            let policy = read_policy(&policy)?;
            let init = match test {
                Some(t) => policy.with_test(&TestCase::read(t)?),
                None => policy.init(),
            };
            let strategy = strategy.or(policy.strategy).unwrap_or(Strategy::Pu);
            let mode = mode.or(policy.mode).unwrap_or(Mode::Measure);
            let mut cfg = StrategyConfig::new(strategy, mode);
            if let Some(b) = budget {
                cfg = cfg.with_budget(b);
            }
            if let Some(path) = upgrades {
                cfg = UpgradePlan::read(path).map_err(failed)?.apply(cfg);
            }
            let program = load_program(program)?;
            cmd_run(&program, &init, &policy, &cfg, trace_out.as_deref(), out)
        }
        Command::Analyze { trace, source, sink } => cmd_analyze(&trace, source.zip(sink), out),
        Command::InferUpgrades {
            policy,
            tests,
            max_rounds,
            out: plan_out,
            program,
        } => {
            let policy = read_policy(&policy)?;
            let inits = test_inits(&policy, tests.as_deref())?;
            let program = load_program(program)?;
            let rounds = max_rounds.unwrap_or_else(|| default_max_rounds(&program));
            let plan = infer_upgrades(&program, &TestSuite::new(inits), &policy.sources, rounds).map_err(failed)?;
            let text = plan.to_json();
            if let Some(path) = plan_out {
                std::fs::write(&path, format!("{text}\n")).map_err(|e| failed(format!("{}: {e}", path.display())))?;
            }
            emit_text(out, &text)?;
            Ok(EXIT_OK)
        }
        Command::CheckSecrecy {
            condition,
            policy,
            test,
            budget,
            program,
        } => {
            let policy = read_policy(&policy)?;
            let init = match test {
                Some(t) => policy.with_test(&TestCase::read(t)?),
                None => policy.init(),
            };
            let program = load_program(program)?;
            let verdict = check_secrecy(
                condition,
                &program,
                &init,
                &policy.sources,
                &LowDomain::default(),
                budget,
            );
            emit(out, &SecrecyReport::new(condition, &verdict))?;
            Ok(EXIT_OK)
        }
        Command::Metrics {
            policy,
            tests,
            strategy,
            lcr,
            program,
        } => {
            let policy = read_policy(&policy)?;
            let inits = test_inits(&policy, tests.as_deref())?;
            let program = load_program(program)?;
            let report = metrics_report(&program, &inits, &policy.sources, strategy, lcr).map_err(failed)?;
            emit(out, &report)?;
            Ok(EXIT_OK)
        }
        Command::TheoremSuite { seed, n, strategy } => {
            let report = theorem_suite_with(strategy, seed, n);
            emit(out, &report)?;
            Ok(if report.violations.is_empty() {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::Corpus { dir } => {
            let report = check_corpus(&dir)?;
            emit(out, &report)?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    strategy: Strategy,
    mode: Mode,
    outcome: &'a Outcome,
    counters: FlowCount,
    sink_count: FlowCount,
    violations: &'a [Violation],
    outputs: &'a [Observation],
}

fn cmd_run(
    program: &Stmt,
    init: &InitState,
    policy: &Policy,
    cfg: &StrategyConfig,
    trace_out: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let r = run(program, init, &policy.sources, cfg).map_err(failed)?;
    if let Some(path) = trace_out {
        write_trace(&r.trace, path).map_err(failed)?;
    }
    emit(
        out,
        &RunReport {
            strategy: cfg.strategy,
            mode: cfg.mode,
            outcome: &r.outcome,
            counters: r.counters,
            sink_count: r.sink_count,
            violations: &r.violations,
            outputs: &r.outputs,
        },
    )?;
    Ok(match r.outcome {
        Outcome::Completed => EXIT_OK,
        Outcome::Stopped { .. } => EXIT_STOPPED,
        Outcome::BudgetExhausted => EXIT_ERROR,
    })
}

fn cmd_analyze(path: &Path, endpoints: Option<(Loc, Loc)>, out: &mut dyn Write) -> CmdResult {
    let t = read_trace(path).map_err(failed)?;
    emit(out, &analyze(&t, endpoints).map_err(failed)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SecrecyReport<'a> {
    condition: Condition,
    verdict: &'static str,
    counterexample: Option<&'a crate::secrecy::Counterexample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
}

impl<'a> SecrecyReport<'a> {
    fn new(condition: Condition, v: &'a Verdict) -> Self {
        let (counterexample, reason) = match v {
            Verdict::Holds => (None, None),
            Verdict::Fails { counterexample } => (Some(counterexample), None),
            Verdict::Undecided { reason } => (None, Some(reason.as_str())),
        };
        SecrecyReport {
            condition,
            verdict: v.name(),
            counterexample,
            reason,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with(
            std::iter::once("nanoflow").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "p.njs"]).0, EXIT_USAGE);
        assert_eq!(
            call(&["run", "--strategy", "bogus", "--policy", "x", "p.njs"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            call(&["analyze", "--trace", "t", "--source", "a.njs:1:1"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("theorem-suite"));
    }

    #[test]
    fn missing_policy_file_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let prog = dir.path().join("p.njs");
        std::fs::write(&prog, "x = 1;\n").unwrap();
        let missing = dir.path().join("none.json");
        let (code, _, err) = call(&["run", "--policy", missing.to_str().unwrap(), prog.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("policy"));
    }

    #[test]
    fn runtime_errors_exit_3() {
        let dir = tempfile::tempdir().unwrap();
        let prog = dir.path().join("p.njs");
        let pol = dir.path().join("p.json");
        std::fs::write(&prog, "x = y;\n").unwrap();
        std::fs::write(&pol, "{}").unwrap();
        let (code, out, err) = call(&["run", "--policy", pol.to_str().unwrap(), prog.to_str().unwrap()]);
        assert_eq!(code, EXIT_ERROR);
        assert!(out.is_empty());
        assert!(err.contains("unbound name `y`"), "{err}");
    }

    #[test]
    fn secrecy_report_shapes() {
        let holds = serde_json::to_string(&SecrecyReport::new(Condition::Explicit, &Verdict::Holds)).unwrap();
        assert_eq!(
            holds,
            r#"{"condition":"explicit","verdict":"holds","counterexample":null}"#
        );
        let undecided = Verdict::Undecided {
            reason: "budget".into(),
        };
        let u = serde_json::to_string(&SecrecyReport::new(Condition::Observable, &undecided)).unwrap();
        assert_eq!(
            u,
            r#"{"condition":"observable","verdict":"undecided","counterexample":null,"reason":"budget"}"#
        );
    }
}
