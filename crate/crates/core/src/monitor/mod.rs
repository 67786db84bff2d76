//! Flow-counting monitored interpreter.

mod flow;
mod machine;
mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use flow::{delta, FlowCount, Label};
pub use machine::{run, run_observed, ExecEvent, Observer};
pub use value::{Addr, Binding, CyclicHeap, Heap, InitData, InitState, Object, Payload, Value, ValueId};

use crate::lang::{BaseValue, Loc, Name};
use crate::trace::Trace;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Taint,
    Observable,
    Nsu,
    Pu,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Taint, Strategy::Observable, Strategy::Nsu, Strategy::Pu];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Taint => "taint",
            Strategy::Observable => "observable",
            Strategy::Nsu => "nsu",
            Strategy::Pu => "pu",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for Strategy {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.to_ascii_lowercase())
            .ok_or_else(|| UnknownName {
                kind: "strategy",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Enforce,
    Measure,
}

impl FromStr for Mode {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "enforce" => Ok(Mode::Enforce),
            "measure" => Ok(Mode::Measure),
            _ => Err(UnknownName {
                kind: "mode",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Enforce => "enforce",
            Mode::Measure => "measure",
        })
    }
}

/// How a run is monitored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub mode: Mode,
    /// Stop when a sensitive value reaches a sink (enforce mode only).
    pub stop_on_sink: bool,
    /// Locations where an NSU write does not stop the run.
    pub suppressed: BTreeSet<Loc>,
    /// `upgrade(x)` executed right before the statement at each location.
    pub upgrades: BTreeSet<(Loc, Name)>,
    pub budget: u64,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, mode: Mode) -> Self {
        StrategyConfig {
            strategy,
            mode,
            stop_on_sink: mode == Mode::Enforce,
            suppressed: BTreeSet::new(),
            upgrades: BTreeSet::new(),
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn measure(strategy: Strategy) -> Self {
        StrategyConfig::new(strategy, Mode::Measure)
    }

    /// Enforce mode that only stops on the strategy's own write/use checks.
    pub fn enforce_without_sink_stops(strategy: Strategy) -> Self {
        StrategyConfig {
            stop_on_sink: false,
            ..StrategyConfig::new(strategy, Mode::Enforce)
        }
    }

    pub fn with_upgrades(mut self, upgrades: impl IntoIterator<Item = (Loc, Name)>) -> Self {
        self.upgrades.extend(upgrades);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "var")]
pub enum StopReason {
    /// Write to an insensitive location in a sensitive context.
    NSUWrite(Name),
    /// Use of a partially leaked value.
    PUUse(Name),
    SinkViolation,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::NSUWrite(x) => write!(f, "NSUWrite({x})"),
            StopReason::PUUse(x) => write!(f, "PUUse({x})"),
            StopReason::SinkViolation => f.write_str("SinkViolation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Stopped { reason: StopReason, loc: Loc },
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub reason: StopReason,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignRecord {
    pub loc: Loc,
    pub target: String,
    pub sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub loc: Loc,
    pub guard_sensitive: bool,
    pub taken: bool,
}

/// Sink observation: base values with their field paths.
pub type Observation = BTreeSet<(BaseValue, Vec<Name>)>;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trace: Trace,
    /// Global micro-flow totals.
    pub counters: FlowCount,
    pub sink_count: FlowCount,
    pub assign_log: Vec<AssignRecord>,
    pub branch_log: Vec<BranchRecord>,
    pub violations: Vec<Violation>,
    pub outputs: Vec<Observation>,
    pub env: BTreeMap<Name, Value>,
    pub heap: Heap,
    pub steps: u64,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound name `{0}`")]
    UnboundName(Name),
    #[error("object {0} has no field `{1}`")]
    NoSuchField(Addr, Name),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("integer overflow")]
    Overflow,
    #[error(transparent)]
    CyclicHeap(#[from] CyclicHeap),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{loc}: {kind}")]
pub struct RunError {
    pub kind: EvalError,
    pub loc: Loc,
}

#[cfg(test)]
mod tests;
