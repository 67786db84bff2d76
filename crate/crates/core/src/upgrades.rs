//! Upgrade-statement inference: run the tests under PU, and wherever a
//! partially leaked variable is used, upgrade it right before that statement.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lang::{Loc, Name, Stmt};
use crate::monitor::{run, InitState, Outcome, RunError, StopReason, Strategy, StrategyConfig, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Insertion {
    pub loc: Loc,
    pub var: Name,
}

/// Upgrade sites, applied at run time by location; the source text is left
/// alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradePlan {
    pub insertions: BTreeSet<Insertion>,
}

impl UpgradePlan {
    pub fn new() -> Self {
        UpgradePlan::default()
    }

    pub fn len(&self) -> usize {
        self.insertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.insertions.is_empty()
    }

    /// Adds a site; returns false if it was already there.
    pub fn insert(&mut self, loc: Loc, var: impl Into<Name>) -> bool {
        self.insertions.insert(Insertion { loc, var: var.into() })
    }

    pub fn locs(&self) -> BTreeSet<Loc> {
        self.insertions.iter().map(|i| i.loc.clone()).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Loc, Name)> + '_ {
        self.insertions.iter().map(|i| (i.loc.clone(), i.var.clone()))
    }

    /// `cfg` with this plan's upgrades added.
    pub fn apply(&self, cfg: StrategyConfig) -> StrategyConfig {
        cfg.with_upgrades(self.pairs())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PlanFileError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PlanFileError(path.display().to_string(), e.to_string()))?;
        UpgradePlan::from_json(&text).map_err(|e| PlanFileError(path.display().to_string(), e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}: {1}")]
pub struct PlanFileError(pub String, pub String);

/// Initial states to run, with a per-run step budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    pub cases: Vec<InitState>,
    pub budget: u64,
}

impl TestSuite {
    pub fn new(cases: Vec<InitState>) -> Self {
        TestSuite {
            cases,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferError {
    #[error("no fixpoint after {0} rounds")]
    RoundLimitExceeded(usize),
    #[error("{loc}: upgrade({var}) is already in place but the run still stops there")]
    NoProgress { loc: Loc, var: Name },
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Default round limit: one per assignment statement, plus the final clean pass.
pub fn default_max_rounds(program: &Stmt) -> usize {
    program.assignment_count() + 1
}

/// Extends `plan` until every test completes under PU without stopping on a
/// partially leaked use. Each round is one pass over the tests that ends at
/// the first stop; sink violations do not stop these runs.
pub fn infer_from(
    program: &Stmt,
    tests: &TestSuite,
    sources: &[Name],
    mut plan: UpgradePlan,
    max_rounds: usize,
) -> Result<(UpgradePlan, usize), InferError> {
    for round in 1..=max_rounds {
        let cfg = plan.apply(StrategyConfig::enforce_without_sink_stops(Strategy::Pu).with_budget(tests.budget));
        let mut stop = None;
        for init in &tests.cases {
            let r = run(program, init, sources, &cfg)?;
            if let Outcome::Stopped {
                reason: StopReason::PUUse(var),
                loc,
            } = r.outcome
            {
                stop = Some((loc, var));
                break;
            }
        }
        match stop {
            None => return Ok((plan, round)),
            Some((loc, var)) => {
                if !plan.insert(loc.clone(), var.clone()) {
                    return Err(InferError::NoProgress { loc, var });
                }
            }
        }
    }
    Err(InferError::RoundLimitExceeded(max_rounds))
}

pub fn infer_upgrades(
    program: &Stmt,
    tests: &TestSuite,
    sources: &[Name],
    max_rounds: usize,
) -> Result<UpgradePlan, InferError> {
    infer_from(program, tests, sources, UpgradePlan::new(), max_rounds).map(|(p, _)| p)
}

/// True when inference started from `plan` adds nothing.
pub fn verify_fixpoint(
    program: &Stmt,
    plan: &UpgradePlan,
    tests: &TestSuite,
    sources: &[Name],
) -> Result<bool, InferError> {
    let (after, _) = infer_from(program, tests, sources, plan.clone(), default_max_rounds(program))?;
    Ok(after.len() == plan.len())
}
