use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::extract::{extract_explicit, extract_observable, ExtractError};
use crate::lang::{BaseValue, Name, Stmt};
use crate::monitor::{
    run, CyclicHeap, Heap, InitData, InitState, Label, Observation, Outcome, Payload, Strategy, StrategyConfig, Value,
    DEFAULT_BUDGET,
};

/// Values substituted into sensitive positions, per base type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowDomain {
    pub bools: Vec<bool>,
    pub ints: Vec<i64>,
    pub strs: Vec<String>,
}

impl Default for LowDomain {
    fn default() -> Self {
        LowDomain {
            bools: vec![true, false],
            ints: vec![0, 1, 2],
            strs: vec![String::new(), "a".into(), "b".into()],
        }
    }
}

impl LowDomain {
    fn choices(&self, d: &InitData) -> Vec<InitData> {
        match d {
            InitData::Bool(_) => self.bools.iter().map(|b| InitData::Bool(*b)).collect(),
            InitData::Int(_) => self.ints.iter().map(|n| InitData::Int(*n)).collect(),
            InitData::Str(_) => self.strs.iter().map(|s| InitData::Str(s.clone())).collect(),
            InitData::Object(_) => unreachable!("objects are expanded field by field"),
        }
    }
}

pub const MAX_VARIANTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails { counterexample: Counterexample },
    Undecided { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails { .. } => "fails",
            Verdict::Undecided { .. } => "undecided",
        }
    }

    pub fn holds(&self) -> bool {
        *self == Verdict::Holds
    }
}

/// What a run showed an observer: its sink outputs, or the error it hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Observed {
    Outputs(Vec<Observation>),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Bindings of the low-equivalent start state that was changed.
    pub state: BTreeMap<Name, InitData>,
    pub expected: Observed,
    pub actual: Observed,
}

/// Names whose initial values the attacker cannot see: bindings labelled
/// sensitive, policy sources, and initially bound variables named by a
/// `markSrc` in the program.
pub fn sensitive_inputs(program: &Stmt, init: &InitState, sources: &[Name]) -> BTreeSet<Name> {
    let mut out: BTreeSet<Name> = init
        .env
        .iter()
        .filter(|(_, b)| b.label.is_sensitive())
        .map(|(n, _)| n.clone())
        .collect();
    out.extend(sources.iter().filter(|s| init.env.contains_key(*s)).cloned());
    program.walk(&mut |s| {
        if let Stmt::MarkSrc { target, .. } = s {
            if init.env.contains_key(target) {
                out.insert(target.clone());
            }
        }
    });
    out
}

/// Path to one base value inside an initial binding.
type Position = (Name, Vec<Name>);

fn positions(name: &Name, d: &InitData, path: &mut Vec<Name>, out: &mut Vec<(Position, InitData)>) {
    match d {
        InitData::Object(fields) => {
            for (f, v) in fields {
                path.push(f.clone());
                positions(name, v, path, out);
                path.pop();
            }
        }
        base => out.push(((name.clone(), path.clone()), base.clone())),
    }
}

fn set_position(d: &mut InitData, path: &[Name], v: InitData) {
    match path.split_first() {
        None => *d = v,
        Some((f, rest)) => match d {
            InitData::Object(fields) => set_position(fields.get_mut(f).expect("path exists"), rest, v),
            _ => unreachable!("path follows the data"),
        },
    }
}

/// Every start state low-equivalent to `init`: sensitive base positions range
/// over `domain`, everything else is kept. `None` when there are more than
/// [`MAX_VARIANTS`].
pub fn low_variants(init: &InitState, sensitive: &BTreeSet<Name>, domain: &LowDomain) -> Option<Vec<InitState>> {
    let mut slots = Vec::new();
    for name in sensitive {
        if let Some(b) = init.env.get(name) {
            positions(name, &b.value, &mut Vec::new(), &mut slots);
        }
    }
    let mut total = 1usize;
    let choices: Vec<Vec<InitData>> = slots.iter().map(|(_, d)| domain.choices(d)).collect();
    for c in &choices {
        total = total.checked_mul(c.len()).filter(|t| *t <= MAX_VARIANTS)?;
    }
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut state = init.clone();
        for (((name, path), _), c) in slots.iter().zip(&choices) {
            let pick = c[k % c.len()].clone();
            k /= c.len();
            let b = state.env.get_mut(name).expect("slot comes from env");
            set_position(&mut b.value, path, pick);
        }
        out.push(state);
    }
    Some(out)
}

/// A machine state as far as low equivalence is concerned.
#[derive(Debug, Clone)]
pub struct State {
    pub env: BTreeMap<Name, Value>,
    pub heap: Heap,
}

impl State {
    /// The state `init` builds before the first statement.
    pub fn initial(init: &InitState, sources: &[Name]) -> Result<State, crate::monitor::RunError> {
        let r = run(&Stmt::Skip, init, sources, &StrategyConfig::measure(Strategy::Taint))?;
        Ok(State {
            env: r.env,
            heap: r.heap,
        })
    }
}

/// Labels of every component, and the payloads of the insensitive ones.
type View = Vec<(Vec<Name>, Label, Option<BaseValue>)>;

fn view(heap: &Heap, v: &Value) -> Result<View, CyclicHeap> {
    let mut out = Vec::new();
    view_into(heap, v, &mut Vec::new(), &mut out, &mut Vec::new())?;
    Ok(out)
}

fn view_into(
    heap: &Heap,
    v: &Value,
    path: &mut Vec<Name>,
    out: &mut View,
    stack: &mut Vec<crate::monitor::Addr>,
) -> Result<(), CyclicHeap> {
    let shown = match (&v.payload, v.is_sensitive()) {
        (Payload::Base(b), false) => Some(b.clone()),
        _ => None,
    };
    out.push((path.clone(), v.label, shown));
    if let Payload::Addr(a) = v.payload {
        if stack.contains(&a) {
            return Err(CyclicHeap(a));
        }
        stack.push(a);
        for (f, u) in heap.get(a) {
            path.push(f.clone());
            view_into(heap, u, path, out, stack)?;
            path.pop();
        }
        stack.pop();
    }
    Ok(())
}

/// Same labels everywhere, same insensitive values, same heap size.
pub fn low_equivalent(s1: &State, s2: &State) -> Result<bool, CyclicHeap> {
    if s1.heap.len() != s2.heap.len() || !s1.env.keys().eq(s2.env.keys()) {
        return Ok(false);
    }
    for (x, v1) in &s1.env {
        if view(&s1.heap, v1)? != view(&s2.heap, &s2.env[x])? {
            return Ok(false);
        }
    }
    Ok(true)
}

enum RunView {
    Seen(Observed),
    OutOfBudget,
}

fn observe(program: &Stmt, init: &InitState, budget: u64) -> RunView {
    let cfg = StrategyConfig::measure(Strategy::Taint).with_budget(budget);
    match run(program, init, &[], &cfg) {
        Err(e) => RunView::Seen(Observed::Error(e.to_string())),
        Ok(r) if r.outcome == Outcome::BudgetExhausted => RunView::OutOfBudget,
        Ok(r) => RunView::Seen(Observed::Outputs(r.outputs)),
    }
}

/// Runs `program` from every start state low-equivalent to `init` and
/// compares the sink outputs with those of `init` itself.
pub fn check_noninterference(
    program: &Stmt,
    init: &InitState,
    sensitive: &BTreeSet<Name>,
    domain: &LowDomain,
    budget: u64,
) -> Verdict {
    let RunView::Seen(expected) = observe(program, init, budget) else {
        return Verdict::Undecided {
            reason: "reference run exceeded its budget".into(),
        };
    };
    let Some(variants) = low_variants(init, sensitive, domain) else {
        return Verdict::Undecided {
            reason: format!("more than {MAX_VARIANTS} low-equivalent states"),
        };
    };
    let mut undecided = false;
    for v in variants {
        match observe(program, &v, budget) {
            RunView::OutOfBudget => undecided = true,
            RunView::Seen(actual) if actual != expected => {
                let state = sensitive
                    .iter()
                    .filter_map(|n| v.env.get(n).map(|b| (n.clone(), b.value.clone())))
                    .collect();
                return Verdict::Fails {
                    counterexample: Counterexample {
                        state,
                        expected,
                        actual,
                    },
                };
            }
            RunView::Seen(_) => {}
        }
    }
    if undecided {
        Verdict::Undecided {
            reason: "a low-equivalent run exceeded its budget".into(),
        }
    } else {
        Verdict::Holds
    }
}

/// Which extraction a secrecy check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Explicit,
    Observable,
}

impl std::str::FromStr for Condition {
    type Err = crate::monitor::UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Condition::Explicit),
            "observable" => Ok(Condition::Observable),
            _ => Err(crate::monitor::UnknownName {
                kind: "condition",
                value: s.to_string(),
            }),
        }
    }
}

/// Extracts a program from the run of `program` on `init`, then checks the
/// extracted program for noninterference from the same start state.
pub fn check_secrecy(
    condition: Condition,
    program: &Stmt,
    init: &InitState,
    sources: &[Name],
    domain: &LowDomain,
    budget: u64,
) -> Verdict {
    let cfg = StrategyConfig::measure(Strategy::Pu).with_budget(budget);
    let extracted = match condition {
        Condition::Explicit => extract_explicit(program, init, sources, &cfg),
        Condition::Observable => extract_observable(program, init, sources, &cfg),
    };
    match extracted {
        Ok((e, _)) => check_noninterference(&e.body, init, &sensitive_inputs(program, init, sources), domain, budget),
        Err(ExtractError::BudgetExhausted) => Verdict::Undecided {
            reason: "run exceeded its budget".into(),
        },
        Err(e) => Verdict::Undecided { reason: e.to_string() },
    }
}

pub fn check_explicit_secrecy(program: &Stmt, init: &InitState, sources: &[Name], domain: &LowDomain) -> Verdict {
    check_secrecy(Condition::Explicit, program, init, sources, domain, DEFAULT_BUDGET)
}

pub fn check_observable_secrecy(program: &Stmt, init: &InitState, sources: &[Name], domain: &LowDomain) -> Verdict {
    check_secrecy(Condition::Observable, program, init, sources, domain, DEFAULT_BUDGET)
}
