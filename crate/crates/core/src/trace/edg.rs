use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::event::{IFlowEvent, Trace};
use super::interpret::MalformedTrace;
use crate::lang::Loc;
use crate::monitor::ValueId;

/// Event dependence graph over trace indices. `data` edges link an event to
/// the events that produced or last stored the values it uses; `context`
/// edges link a push to the writes and sinks executed under it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EventDependenceGraph {
    pub nodes: usize,
    pub data: BTreeSet<(usize, usize)>,
    pub context: BTreeSet<(usize, usize)>,
    /// push index → matching pop index
    pub pops: BTreeMap<usize, usize>,
}

impl EventDependenceGraph {
    pub fn edges(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.data.iter().chain(&self.context)
    }

    fn successors(&self, with_context: bool) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.nodes];
        for &(a, b) in &self.data {
            succ[a].push(b);
        }
        if with_context {
            for &(a, b) in &self.context {
                succ[a].push(b);
            }
        }
        succ
    }

    /// Nodes reachable from `starts` (inclusive).
    pub fn forward(&self, starts: &[usize], with_context: bool) -> BTreeSet<usize> {
        closure(&self.successors(with_context), starts)
    }

    /// Nodes from which some node in `ends` is reachable (inclusive).
    pub fn backward(&self, ends: &[usize], with_context: bool) -> BTreeSet<usize> {
        let mut pred = vec![Vec::new(); self.nodes];
        for (a, succ) in self.successors(with_context).into_iter().enumerate() {
            for b in succ {
                pred[b].push(a);
            }
        }
        closure(&pred, ends)
    }
}

fn closure(adj: &[Vec<usize>], starts: &[usize]) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = starts.iter().copied().collect();
    let mut work: Vec<usize> = starts.to_vec();
    while let Some(n) = work.pop() {
        for &m in &adj[n] {
            if seen.insert(m) {
                work.push(m);
            }
        }
    }
    seen
}

/// Builds the graph in one pass over the trace.
pub fn build_edg(t: &Trace) -> Result<EventDependenceGraph, MalformedTrace> {
    let mut g = EventDependenceGraph {
        nodes: t.events.len(),
        ..Default::default()
    };
    let mut producers: HashMap<ValueId, Vec<usize>> = HashMap::new();
    let mut last_write: HashMap<ValueId, usize> = HashMap::new();
    let mut open: Vec<usize> = Vec::new();
    for (i, e) in t.events.iter().enumerate() {
        for v in e.consumed() {
            for &p in producers.get(&v).into_iter().flatten() {
                g.data.insert((p, i));
            }
            if let Some(&w) = last_write.get(&v) {
                g.data.insert((w, i));
            }
        }
        match e {
            IFlowEvent::Write { new, .. } => {
                g.context.extend(open.iter().map(|&p| (p, i)));
                last_write.insert(*new, i);
            }
            IFlowEvent::Sink { .. } => g.context.extend(open.iter().map(|&p| (p, i))),
            IFlowEvent::Push { .. } => open.push(i),
            IFlowEvent::Pop { .. } => {
                let p = open.pop().ok_or(MalformedTrace::UnbalancedPop { index: i })?;
                g.pops.insert(p, i);
            }
            IFlowEvent::Source { v, .. } => producers.entry(*v).or_default().push(i),
            IFlowEvent::Op { new, .. } | IFlowEvent::Upgrade { new, .. } => producers.entry(*new).or_default().push(i),
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubtraceError {
    #[error("no source or upgrade event at {0}")]
    NoSuchSource(Loc),
    #[error("no sink event at {0}")]
    NoSuchSink(Loc),
}

/// Events on some path from a source or upgrade at `lsrc` to a sink at
/// `lsnk`, in trace order, plus the pops closing included pushes. Empty when
/// both locations exist but no path connects them.
pub fn source_to_sink_subtrace(
    g: &EventDependenceGraph,
    t: &Trace,
    lsrc: &Loc,
    lsnk: &Loc,
) -> Result<Trace, SubtraceError> {
    source_to_sink_indices(g, t, lsrc, lsnk).map(|keep| t.select(keep))
}

/// Indices into `t` of the events [`source_to_sink_subtrace`] keeps.
pub fn source_to_sink_indices(
    g: &EventDependenceGraph,
    t: &Trace,
    lsrc: &Loc,
    lsnk: &Loc,
) -> Result<BTreeSet<usize>, SubtraceError> {
    let starts: Vec<usize> = t
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, IFlowEvent::Source { loc, .. } | IFlowEvent::Upgrade { loc, .. } if loc == lsrc))
        .map(|(i, _)| i)
        .collect();
    let ends: Vec<usize> = t
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, IFlowEvent::Sink { loc, .. } if loc == lsnk))
        .map(|(i, _)| i)
        .collect();
    if starts.is_empty() {
        return Err(SubtraceError::NoSuchSource(lsrc.clone()));
    }
    if ends.is_empty() {
        return Err(SubtraceError::NoSuchSink(lsnk.clone()));
    }
    let fwd = g.forward(&starts, true);
    let bwd = g.backward(&ends, true);
    let mut keep: BTreeSet<usize> = fwd.intersection(&bwd).copied().collect();
    let pops: Vec<usize> = keep.iter().filter_map(|i| g.pops.get(i).copied()).collect();
    keep.extend(pops);
    Ok(keep)
}

/// Source locations (of source and upgrade events) and sink locations, in
/// order of first appearance.
pub fn endpoint_locs(t: &Trace) -> (Vec<Loc>, Vec<Loc>) {
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for e in &t.events {
        match e {
            IFlowEvent::Source { loc, .. } | IFlowEvent::Upgrade { loc, .. } if !sources.contains(loc) => {
                sources.push(loc.clone())
            }
            IFlowEvent::Sink { loc, .. } if !sinks.contains(loc) => sinks.push(loc.clone()),
            _ => {}
        }
    }
    (sources, sinks)
}

/// Every non-empty source-to-sink subtrace of `t`.
pub fn all_subtraces(t: &Trace) -> Result<Vec<(Loc, Loc, Trace)>, MalformedTrace> {
    let g = build_edg(t)?;
    let (sources, sinks) = endpoint_locs(t);
    let mut out = Vec::new();
    for src in &sources {
        for snk in &sinks {
            let sub = source_to_sink_subtrace(&g, t, src, snk).expect("locations come from the trace");
            if !sub.is_empty() {
                out.push((src.clone(), snk.clone(), sub));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn l(line: u32) -> Loc {
        Loc::new("t", line, 1)
    }

    #[test]
    fn single_source_has_no_edges() {
        let t = trace(vec![IFlowEvent::Source { v: 1, loc: l(1) }]);
        let g = build_edg(&t).unwrap();
        assert_eq!(g.nodes, 1);
        assert_eq!(g.edges().count(), 0);
    }

    #[test]
    fn binary_operation_has_two_in_edges() {
        let t = trace(vec![
            IFlowEvent::Source { v: 1, loc: l(1) },
            IFlowEvent::Source { v: 2, loc: l(2) },
            IFlowEvent::Op {
                a1: 1,
                a2: Some(2),
                new: 3,
                loc: l(3),
            },
        ]);
        let g = build_edg(&t).unwrap();
        assert_eq!(g.data, BTreeSet::from([(0, 2), (1, 2)]));
    }

    #[test]
    fn direct_flow_subtrace() {
        let t = trace(vec![
            IFlowEvent::Source { v: 1, loc: l(1) },
            IFlowEvent::Source { v: 2, loc: l(1) },
            IFlowEvent::Sink { v: 1, loc: l(2) },
        ]);
        let g = build_edg(&t).unwrap();
        let sub = source_to_sink_subtrace(&g, &t, &l(1), &l(2)).unwrap();
        assert_eq!(sub.events, vec![t.events[0].clone(), t.events[2].clone()]);
        assert_eq!(
            source_to_sink_subtrace(&g, &t, &l(1), &l(9)),
            Err(SubtraceError::NoSuchSink(l(9)))
        );
        assert_eq!(
            source_to_sink_subtrace(&g, &t, &l(9), &l(2)),
            Err(SubtraceError::NoSuchSource(l(9)))
        );
    }

    #[test]
    fn context_edges_pull_in_push_and_pop() {
        let t = trace(vec![
            IFlowEvent::Source { v: 1, loc: l(1) },
            IFlowEvent::Push { v: 1, loc: l(2) },
            IFlowEvent::Write {
                old: Some(4),
                new: 5,
                loc: l(3),
            },
            IFlowEvent::Pop { loc: l(2) },
            IFlowEvent::Sink { v: 5, loc: l(4) },
        ]);
        let g = build_edg(&t).unwrap();
        assert!(g.context.contains(&(1, 2)));
        assert_eq!(g.pops[&1], 3);
        let sub = source_to_sink_subtrace(&g, &t, &l(1), &l(4)).unwrap();
        assert_eq!(sub.events, t.events);
        for (a, b) in g.edges() {
            assert!(a < b);
        }
    }
}
