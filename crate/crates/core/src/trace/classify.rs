use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::edg::build_edg;
use super::event::{IFlowEvent, Trace};
use super::interpret::{interpret_trace, MalformedTrace};
use crate::lang::Loc;
use crate::monitor::Strategy;

/// Which micro flows a source-to-sink flow relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubtraceClassification {
    Direct,
    ExplicitOnly,
    /// `explicit_path`: the sinks are reachable from the sources over data
    /// dependences alone, without passing through a push.
    ExplicitAndObservable {
        explicit_path: bool,
    },
    ObservableOnly,
    InvolvesHidden,
}

impl SubtraceClassification {
    pub fn name(&self) -> &'static str {
        match self {
            SubtraceClassification::Direct => "direct",
            SubtraceClassification::ExplicitOnly => "explicit_only",
            SubtraceClassification::ExplicitAndObservable { .. } => "explicit_and_observable",
            SubtraceClassification::ObservableOnly => "observable_only",
            SubtraceClassification::InvolvesHidden => "involves_hidden",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("subtrace has no source-to-sink path")]
    EmptySubtrace,
    #[error(transparent)]
    Malformed(#[from] MalformedTrace),
}

pub fn classify_subtrace(sub: &Trace) -> Result<SubtraceClassification, ClassifyError> {
    let starts: Vec<usize> = sub
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, IFlowEvent::Source { .. } | IFlowEvent::Upgrade { .. }))
        .map(|(i, _)| i)
        .collect();
    let has_sink = sub.events.iter().any(|e| matches!(e, IFlowEvent::Sink { .. }));
    if starts.is_empty() || !has_sink {
        return Err(ClassifyError::EmptySubtrace);
    }
    if sub.events.iter().any(|e| matches!(e, IFlowEvent::Upgrade { .. })) {
        return Ok(SubtraceClassification::InvolvesHidden);
    }
    let c = interpret_trace(sub)?.counters;
    Ok(match (c.explicit > 0, c.observable > 0) {
        (false, false) => SubtraceClassification::Direct,
        (true, false) => SubtraceClassification::ExplicitOnly,
        (false, true) => SubtraceClassification::ObservableOnly,
        (true, true) => {
            let g = build_edg(sub)?;
            let reached = g.forward(&starts, false);
            let explicit_path = reached
                .iter()
                .any(|&i| matches!(sub.events[i], IFlowEvent::Sink { .. }));
            SubtraceClassification::ExplicitAndObservable { explicit_path }
        }
    })
}

/// Whether a monitor using `strategy` notices a flow of this class.
pub fn detectable_by(c: SubtraceClassification, strategy: Strategy) -> bool {
    use SubtraceClassification::*;
    match strategy {
        Strategy::Taint => matches!(c, Direct | ExplicitOnly | ExplicitAndObservable { explicit_path: true }),
        Strategy::Observable => c != InvolvesHidden,
        Strategy::Nsu | Strategy::Pu => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UniqueFlow {
    pub locs: BTreeSet<Loc>,
    pub classification: SubtraceClassification,
    pub multiplicity: usize,
}

/// Groups flows by the set of code locations they touch.
pub fn unique_flows(flows: &[(Trace, SubtraceClassification)]) -> Vec<UniqueFlow> {
    let mut out: Vec<UniqueFlow> = Vec::new();
    for (t, c) in flows {
        let locs: BTreeSet<Loc> = t.events.iter().map(|e| e.loc().clone()).collect();
        match out.iter_mut().find(|u| u.locs == locs) {
            Some(u) => u.multiplicity += 1,
            None => out.push(UniqueFlow {
                locs,
                classification: *c,
                multiplicity: 1,
            }),
        }
    }
    out
}
