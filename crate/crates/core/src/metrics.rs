//! Label creep ratio, sensitive branch coverage and permissiveness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::lang::{Loc, Name, Stmt};
use crate::monitor::{
    run, AssignRecord, BranchRecord, FlowCount, InitState, Outcome, RunError, StopReason, Strategy, StrategyConfig,
    UnknownName,
};

/// Exact fraction in `[0, 1]`, serialized as `{"ratio":"1/3","value":0.333..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fraction(pub Ratio<u64>);

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        Fraction(Ratio::new(num, den))
    }

    pub fn value(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Fraction", 2)?;
        st.serialize_field("ratio", &self.0.to_string())?;
        st.serialize_field("value", &self.value())?;
        st.end()
    }
}

/// What the label creep ratio counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LcrMode {
    /// Assignment events.
    #[default]
    Events,
    /// Distinct assigned variables and fields; a target counts as sensitive
    /// once any assignment to it stored a sensitive value.
    Locations,
}

impl FromStr for LcrMode {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "events" => Ok(LcrMode::Events),
            "locations" => Ok(LcrMode::Locations),
            _ => Err(UnknownName {
                kind: "lcr mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LcrPoint {
    /// Position in the assignment log.
    pub index: usize,
    #[serde(flatten)]
    pub ratio: Fraction,
}

/// Cumulative label creep ratio after each assignment.
pub fn lcr_series(log: &[AssignRecord], mode: LcrMode) -> Vec<LcrPoint> {
    let mut points = Vec::with_capacity(log.len());
    let mut sensitive = 0u64;
    let mut targets: BTreeMap<&str, bool> = BTreeMap::new();
    for (index, rec) in log.iter().enumerate() {
        let ratio = match mode {
            LcrMode::Events => {
                sensitive += rec.sensitive as u64;
                Fraction::new(sensitive, index as u64 + 1)
            }
            LcrMode::Locations => {
                *targets.entry(&rec.target).or_default() |= rec.sensitive;
                let hot = targets.values().filter(|s| **s).count() as u64;
                Fraction::new(hot, targets.len() as u64)
            }
        };
        points.push(LcrPoint { index, ratio });
    }
    points
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub true_covered: bool,
    pub false_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SbcReport {
    pub conditionals: BTreeMap<Loc, Coverage>,
    #[serde(flatten)]
    pub ratio: Fraction,
}

/// Sensitive branch coverage over the branch logs of several runs. With no
/// sensitive conditional the ratio is 1.
pub fn sbc<'a>(logs: impl IntoIterator<Item = &'a [BranchRecord]>) -> SbcReport {
    let logs: Vec<&[BranchRecord]> = logs.into_iter().collect();
    let sensitive: BTreeSet<&Loc> = logs
        .iter()
        .flat_map(|l| l.iter())
        .filter(|b| b.guard_sensitive)
        .map(|b| &b.loc)
        .collect();
    let mut conditionals: BTreeMap<Loc, Coverage> =
        sensitive.iter().map(|l| ((*l).clone(), Coverage::default())).collect();
    for b in logs.iter().flat_map(|l| l.iter()) {
        if let Some(c) = conditionals.get_mut(&b.loc) {
            if b.taken {
                c.true_covered = true;
            } else {
                c.false_covered = true;
            }
        }
    }
    let both = conditionals
        .values()
        .filter(|c| c.true_covered && c.false_covered)
        .count() as u64;
    let ratio = if conditionals.is_empty() {
        Fraction::new(1, 1)
    } else {
        Fraction::new(both, conditionals.len() as u64)
    };
    SbcReport { conditionals, ratio }
}

pub const MAX_RESTARTS: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PermissivenessReport {
    pub nsu_stop_locs: BTreeSet<Loc>,
    pub pu_stop_locs: BTreeSet<Loc>,
}

/// Stop locations of NSU and PU over `tests`. NSU stops are enumerated by
/// suppressing each seen location and rerunning; PU stops by upgrading the
/// offending variable at the stop location, shared across tests, until a
/// whole pass runs clean.
pub fn permissiveness(program: &Stmt, tests: &[InitState], sources: &[Name]) -> Result<PermissivenessReport, RunError> {
    let mut report = PermissivenessReport::default();
    for init in tests {
        let mut cfg = StrategyConfig::enforce_without_sink_stops(Strategy::Nsu);
        for _ in 0..MAX_RESTARTS {
            let r = run(program, init, sources, &cfg)?;
            let Outcome::Stopped { loc, .. } = r.outcome else { break };
            report.nsu_stop_locs.insert(loc.clone());
            if !cfg.suppressed.insert(loc) {
                break;
            }
        }
    }
    let mut upgrades: BTreeSet<(Loc, Name)> = BTreeSet::new();
    let mut clean = false;
    let mut restarts = 0;
    while !clean && restarts < MAX_RESTARTS * tests.len().max(1) {
        clean = true;
        for init in tests {
            let cfg = StrategyConfig::enforce_without_sink_stops(Strategy::Pu).with_upgrades(upgrades.iter().cloned());
            let r = run(program, init, sources, &cfg)?;
            if let Outcome::Stopped {
                reason: StopReason::PUUse(x),
                loc,
            } = r.outcome
            {
                report.pu_stop_locs.insert(loc.clone());
                if upgrades.insert((loc, x)) {
                    clean = false;
                    restarts += 1;
                    break;
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// One series per test.
    pub lcr: Vec<Vec<LcrPoint>>,
    pub sbc: SbcReport,
    pub permissiveness: PermissivenessReport,
    /// Micro-flow totals over all tests.
    pub microflows: FlowCount,
}

/// Runs every test under `strategy` in measure mode and collects all metrics.
pub fn metrics_report(
    program: &Stmt,
    tests: &[InitState],
    sources: &[Name],
    strategy: Strategy,
    mode: LcrMode,
) -> Result<MetricsReport, RunError> {
    let cfg = StrategyConfig::measure(strategy);
    let runs = tests
        .iter()
        .map(|init| run(program, init, sources, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport {
        lcr: runs.iter().map(|r| lcr_series(&r.assign_log, mode)).collect(),
        sbc: sbc(runs.iter().map(|r| r.branch_log.as_slice())),
        permissiveness: permissiveness(program, tests, sources)?,
        microflows: runs.iter().fold(FlowCount::ZERO, |acc, r| acc + r.counters),
    })
}
