use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::Loc;
use crate::monitor::{Label, ValueId};

/// One iFlow event. `Op` with `a2 = None` is a unary operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "k", rename_all = "lowercase")]
pub enum IFlowEvent {
    Source {
        v: ValueId,
        loc: Loc,
    },
    Sink {
        v: ValueId,
        loc: Loc,
    },
    Write {
        old: Option<ValueId>,
        new: ValueId,
        loc: Loc,
    },
    #[serde(rename = "op")]
    Op {
        a1: ValueId,
        a2: Option<ValueId>,
        new: ValueId,
        loc: Loc,
    },
    Upgrade {
        old: ValueId,
        new: ValueId,
        loc: Loc,
    },
    Push {
        v: ValueId,
        loc: Loc,
    },
    Pop {
        loc: Loc,
    },
}

impl IFlowEvent {
    pub fn loc(&self) -> &Loc {
        match self {
            IFlowEvent::Source { loc, .. }
            | IFlowEvent::Sink { loc, .. }
            | IFlowEvent::Write { loc, .. }
            | IFlowEvent::Op { loc, .. }
            | IFlowEvent::Upgrade { loc, .. }
            | IFlowEvent::Push { loc, .. }
            | IFlowEvent::Pop { loc } => loc,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            IFlowEvent::Source { .. } => "source",
            IFlowEvent::Sink { .. } => "sink",
            IFlowEvent::Write { .. } => "write",
            IFlowEvent::Op { .. } => "op",
            IFlowEvent::Upgrade { .. } => "upgrade",
            IFlowEvent::Push { .. } => "push",
            IFlowEvent::Pop { .. } => "pop",
        }
    }

    /// The value this event creates or stores, if any.
    pub fn produced(&self) -> Option<ValueId> {
        match self {
            IFlowEvent::Source { v, .. } => Some(*v),
            IFlowEvent::Write { new, .. } | IFlowEvent::Op { new, .. } | IFlowEvent::Upgrade { new, .. } => Some(*new),
            _ => None,
        }
    }

    /// Values whose provenance this event depends on.
    pub fn consumed(&self) -> Vec<ValueId> {
        match self {
            IFlowEvent::Op { a1, a2, .. } => std::iter::once(*a1).chain(*a2).collect(),
            IFlowEvent::Sink { v, .. } | IFlowEvent::Push { v, .. } => vec![*v],
            IFlowEvent::Write { new, .. } => vec![*new],
            IFlowEvent::Upgrade { old, .. } => vec![*old],
            IFlowEvent::Source { .. } | IFlowEvent::Pop { .. } => vec![],
        }
    }

    /// Every value id mentioned by the event.
    pub fn mentioned(&self) -> Vec<ValueId> {
        match self {
            IFlowEvent::Source { v, .. } | IFlowEvent::Sink { v, .. } | IFlowEvent::Push { v, .. } => vec![*v],
            IFlowEvent::Write { old, new, .. } => old.iter().copied().chain([*new]).collect(),
            IFlowEvent::Op { a1, a2, new, .. } => [*a1].into_iter().chain(*a2).chain([*new]).collect(),
            IFlowEvent::Upgrade { old, new, .. } => vec![*old, *new],
            IFlowEvent::Pop { .. } => vec![],
        }
    }
}

fn id(v: &ValueId) -> String {
    format!("v{v}")
}

impl fmt::Display for IFlowEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IFlowEvent::Source { v, loc } => write!(f, "source({}, {loc})", id(v)),
            IFlowEvent::Sink { v, loc } => write!(f, "sink({}, {loc})", id(v)),
            IFlowEvent::Write { old, new, .. } => {
                write!(f, "write({}, {})", old.as_ref().map_or("⊥".to_string(), id), id(new))
            }
            IFlowEvent::Op {
                a1, a2: Some(a2), new, ..
            } => write!(f, "operation({}, {}, {})", id(a1), id(a2), id(new)),
            IFlowEvent::Op { a1, a2: None, new, .. } => write!(f, "operation({}, {})", id(a1), id(new)),
            IFlowEvent::Upgrade { old, new, loc } => write!(f, "upgrade({}, {}, {loc})", id(old), id(new)),
            IFlowEvent::Push { v, .. } => write!(f, "push({})", id(v)),
            IFlowEvent::Pop { .. } => f.write_str("pop"),
        }
    }
}

/// Diagnostic entry of the value table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueInfo {
    pub label: Label,
    pub show: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub program: String,
    pub strategy: String,
    pub events: Vec<IFlowEvent>,
    pub values: BTreeMap<ValueId, ValueInfo>,
}

impl Trace {
    pub fn new(program: impl Into<String>, strategy: impl Into<String>) -> Self {
        Trace {
            program: program.into(),
            strategy: strategy.into(),
            ..Trace::default()
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Same header and value table, restricted to the events at `indices`.
    pub fn select(&self, indices: impl IntoIterator<Item = usize>) -> Trace {
        let events: Vec<IFlowEvent> = indices.into_iter().map(|i| self.events[i].clone()).collect();
        let values = events
            .iter()
            .flat_map(IFlowEvent::mentioned)
            .filter_map(|v| self.values.get(&v).map(|info| (v, info.clone())))
            .collect();
        Trace {
            program: self.program.clone(),
            strategy: self.strategy.clone(),
            events,
            values,
        }
    }
}
