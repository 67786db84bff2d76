//! The shipped example corpus and its manifest of expected results.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::LoadError;
use crate::lang::{Loc, Name, Stmt};
use crate::metrics::permissiveness;
use crate::monitor::{run, Binding, FlowCount, InitState, Mode, Outcome, Strategy, StrategyConfig};
use crate::trace::{from_jsonl, interpret_trace, to_jsonl};
use crate::upgrades::{default_max_rounds, infer_upgrades, verify_fixpoint, Insertion, TestSuite};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub programs: Vec<Entry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entry {
    pub file: String,
    #[serde(default)]
    pub about: String,
    #[serde(default)]
    pub sources: Vec<Name>,
    #[serde(default)]
    pub env: BTreeMap<Name, Binding>,
    pub tests: Vec<super::TestCase>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
    /// The plan upgrade inference should produce from `tests`.
    #[serde(default)]
    pub upgrades: Vec<Insertion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expectation {
    pub test: usize,
    pub strategy: Strategy,
    pub mode: Mode,
    /// Final global counters as `[explicit, observable, hidden]`.
    #[serde(default)]
    pub counters: Option<[u64; 3]>,
    #[serde(default)]
    pub outcome: Option<Outcome>,
}

impl Entry {
    pub fn init(&self, test: usize) -> InitState {
        InitState { env: self.env.clone() }.overlay(&InitState {
            env: self.tests[test].env.clone(),
        })
    }

    pub fn inits(&self) -> Vec<InitState> {
        (0..self.tests.len()).map(|i| self.init(i)).collect()
    }
}

impl Manifest {
    pub fn read(dir: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = dir.as_ref().join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| LoadError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Results of checking one corpus program.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EntryReport {
    pub file: String,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub programs: usize,
    pub checks: usize,
    pub failed: usize,
    pub entries: Vec<EntryReport>,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

fn counters(c: FlowCount) -> [u64; 3] {
    [c.explicit, c.observable, c.hidden]
}

struct Checker {
    report: EntryReport,
}

impl Checker {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.report.checks += 1;
        if !ok {
            self.report.failures.push(what());
        }
    }
}

/// Checks every expectation of one entry, then online/offline counter
/// agreement for all strategies and tests, then upgrade inference.
pub fn check_entry(dir: &Path, entry: &Entry) -> EntryReport {
    let mut c = Checker {
        report: EntryReport {
            file: entry.file.clone(),
            ..EntryReport::default()
        },
    };
    let program = match super::load_program(dir.join(&entry.file)) {
        Ok(p) => p,
        Err(e) => {
            c.check(false, || e.to_string());
            return c.report;
        }
    };
    for (i, ex) in entry.expect.iter().enumerate() {
        if ex.test >= entry.tests.len() {
            c.check(false, || format!("expectation {i}: no test {}", ex.test));
            continue;
        }
        let cfg = StrategyConfig::new(ex.strategy, ex.mode);
        let r = match run(&program, &entry.init(ex.test), &entry.sources, &cfg) {
            Ok(r) => r,
            Err(e) => {
                c.check(false, || format!("expectation {i}: {e}"));
                continue;
            }
        };
        if let Some(want) = ex.counters {
            let got = counters(r.counters);
            c.check(got == want, || {
                format!("expectation {i}: counters {got:?}, expected {want:?}")
            });
        }
        if let Some(want) = &ex.outcome {
            c.check(&r.outcome == want, || {
                format!("expectation {i}: outcome {:?}, expected {want:?}", r.outcome)
            });
        }
    }
    check_agreement(&mut c, &program, entry);
    check_inference(&mut c, &program, entry);
    c.report
}

fn check_agreement(c: &mut Checker, program: &Stmt, entry: &Entry) {
    for (t, init) in entry.inits().iter().enumerate() {
        for strategy in Strategy::ALL {
            let r = match run(program, init, &entry.sources, &StrategyConfig::measure(strategy)) {
                Ok(r) => r,
                Err(e) => {
                    c.check(false, || format!("test {t} {strategy}: {e}"));
                    continue;
                }
            };
            let offline = from_jsonl(&to_jsonl(&r.trace))
                .map_err(|e| e.to_string())
                .and_then(|t| interpret_trace(&t).map_err(|e| e.to_string()));
            match offline {
                Ok(i) => c.check(i.counters == r.counters, || {
                    format!(
                        "test {t} {strategy}: monitor {:?} but trace {:?}",
                        r.counters, i.counters
                    )
                }),
                Err(e) => c.check(false, || format!("test {t} {strategy}: {e}")),
            }
        }
    }
}

fn check_inference(c: &mut Checker, program: &Stmt, entry: &Entry) {
    let inits = entry.inits();
    let suite = TestSuite::new(inits.clone());
    let plan = match infer_upgrades(program, &suite, &entry.sources, default_max_rounds(program)) {
        Ok(p) => p,
        Err(e) => {
            c.check(false, || format!("inference: {e}"));
            return;
        }
    };
    let got: BTreeSet<&Insertion> = plan.insertions.iter().collect();
    let want: BTreeSet<&Insertion> = entry.upgrades.iter().collect();
    c.check(got == want, || format!("inference: plan {got:?}, expected {want:?}"));
    match verify_fixpoint(program, &plan, &suite, &entry.sources) {
        Ok(fix) => c.check(fix, || "inference: plan is not a fixpoint".into()),
        Err(e) => c.check(false, || format!("fixpoint: {e}")),
    }
    match permissiveness(program, &inits, &entry.sources) {
        Ok(p) => {
            let locs: Vec<&Loc> = p.pu_stop_locs.iter().collect();
            let plan_locs = plan.locs();
            c.check(plan_locs.iter().eq(locs.iter().copied()), || {
                format!("inference: plan locations {plan_locs:?} but PU stops at {locs:?}")
            })
        }
        Err(e) => c.check(false, || format!("permissiveness: {e}")),
    }
}

/// Checks the whole corpus under `dir`, one program per worker.
pub fn check_corpus(dir: impl AsRef<Path>) -> Result<CorpusReport, LoadError> {
    let dir: PathBuf = dir.as_ref().to_path_buf();
    let manifest = Manifest::read(&dir)?;
    let entries: Vec<EntryReport> = manifest.programs.par_iter().map(|e| check_entry(&dir, e)).collect();
    Ok(CorpusReport {
        programs: entries.len(),
        checks: entries.iter().map(|e| e.checks).sum(),
        failed: entries.iter().filter(|e| !e.passed()).count(),
        entries,
    })
}
