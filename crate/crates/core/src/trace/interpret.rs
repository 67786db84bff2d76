use std::collections::BTreeSet;

use serde::Serialize;

use super::event::{IFlowEvent, Trace};
use crate::monitor::{FlowCount, ValueId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MalformedTrace {
    #[error("event {index}: pop without a matching push")]
    UnbalancedPop { index: usize },
    #[error("event {index}: value v{vid} is missing from the value table")]
    UnknownValue { index: usize, vid: ValueId },
}

/// Interpreter state after one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub counters: FlowCount,
    pub tagged: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interpretation {
    pub counters: FlowCount,
    pub snapshots: Vec<Snapshot>,
    pub tagged: BTreeSet<ValueId>,
}

/// Every value id an event mentions must be in the value table.
pub fn check_values(t: &Trace) -> Result<(), MalformedTrace> {
    for (index, e) in t.events.iter().enumerate() {
        if let Some(vid) = e.mentioned().into_iter().find(|v| !t.values.contains_key(v)) {
            return Err(MalformedTrace::UnknownValue { index, vid });
        }
    }
    Ok(())
}

/// Replays `t` with a tagged-value set and a stack, counting micro flows.
/// Pushes left open at the end (a run stopped inside a branch) are accepted.
pub fn interpret_trace(t: &Trace) -> Result<Interpretation, MalformedTrace> {
    check_values(t)?;
    let mut tagged = BTreeSet::new();
    let mut stack: Vec<ValueId> = Vec::new();
    let mut c = FlowCount::ZERO;
    let mut snapshots = Vec::with_capacity(t.events.len());
    for (index, e) in t.events.iter().enumerate() {
        match e {
            IFlowEvent::Source { v, .. } => {
                tagged.insert(*v);
            }
            IFlowEvent::Write { old, new, .. } => {
                let old_untagged = old.is_none_or(|o| !tagged.contains(&o));
                if old_untagged && tagged.contains(new) {
                    c.explicit += 1;
                }
                if old_untagged && !stack.is_empty() {
                    c.observable += 1;
                }
                tagged.insert(*new);
            }
            IFlowEvent::Op { new, .. } => {
                tagged.insert(*new);
            }
            IFlowEvent::Upgrade { new, .. } => {
                c.hidden += 1;
                tagged.insert(*new);
            }
            IFlowEvent::Push { v, .. } => stack.push(*v),
            IFlowEvent::Pop { .. } => {
                stack.pop().ok_or(MalformedTrace::UnbalancedPop { index })?;
            }
            IFlowEvent::Sink { .. } => {}
        }
        snapshots.push(Snapshot {
            counters: c,
            tagged: tagged.len(),
            depth: stack.len(),
        });
    }
    Ok(Interpretation {
        counters: c,
        snapshots,
        tagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Loc;
    use crate::monitor::Label;
    use crate::trace::ValueInfo;

    fn trace(events: Vec<IFlowEvent>) -> Trace {
        let mut t = Trace::new("t", "pu");
        for e in &events {
            for v in e.mentioned() {
                t.values.insert(
                    v,
                    ValueInfo {
                        label: Label::H,
                        show: String::new(),
                    },
                );
            }
        }
        t.events = events;
        t
    }

    #[test]
    fn empty_trace_counts_nothing() {
        let r = interpret_trace(&Trace::default()).unwrap();
        assert_eq!(r.counters, FlowCount::ZERO);
        assert!(r.snapshots.is_empty());
    }

    #[test]
    fn write_checks_use_the_state_before_the_event() {
        let l = Loc::new("t", 1, 1);
        let t = trace(vec![
            IFlowEvent::Source { v: 1, loc: l.clone() },
            IFlowEvent::Push { v: 1, loc: l.clone() },
            IFlowEvent::Write {
                old: Some(2),
                new: 3,
                loc: l.clone(),
            },
            IFlowEvent::Write {
                old: Some(3),
                new: 1,
                loc: l.clone(),
            },
            IFlowEvent::Pop { loc: l.clone() },
            IFlowEvent::Write {
                old: None,
                new: 1,
                loc: l.clone(),
            },
            IFlowEvent::Upgrade { old: 4, new: 5, loc: l },
        ]);
        let r = interpret_trace(&t).unwrap();
        let counts: Vec<_> = r.snapshots.iter().map(|s| s.counters.as_tuple()).collect();
        assert_eq!(
            counts,
            vec![
                (0, 0, 0),
                (0, 0, 0),
                (0, 1, 0),
                (0, 1, 0),
                (0, 1, 0),
                (1, 1, 0),
                (1, 1, 1)
            ]
        );
        assert_eq!(r.snapshots[2].tagged, 2);
        assert_eq!(r.snapshots[1].depth, 1);
    }

    #[test]
    fn malformed_traces_are_rejected() {
        let l = Loc::new("t", 1, 1);
        let t = trace(vec![IFlowEvent::Pop { loc: l.clone() }]);
        assert_eq!(interpret_trace(&t), Err(MalformedTrace::UnbalancedPop { index: 0 }));
        let mut t = trace(vec![IFlowEvent::Source { v: 1, loc: l }]);
        t.values.clear();
        assert_eq!(
            interpret_trace(&t),
            Err(MalformedTrace::UnknownValue { index: 0, vid: 1 })
        );
    }
}
