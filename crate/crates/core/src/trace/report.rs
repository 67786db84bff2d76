use serde::Serialize;

use super::{
    build_edg, classify_subtrace, detectable_by, endpoint_locs, interpret_trace, source_to_sink_indices, unique_flows,
    ClassifyError, MalformedTrace, SubtraceClassification, SubtraceError, Trace, UniqueFlow,
};
use crate::lang::Loc;
use crate::monitor::{FlowCount, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowReport {
    pub source: Loc,
    pub sink: Loc,
    /// Indices of the subtrace's events in the analyzed trace.
    pub events: Vec<usize>,
    /// `None` when the two locations are not connected.
    pub classification: Option<SubtraceClassification>,
    pub detectable_by: Vec<Strategy>,
}

/// Micro-flow counts and source-to-sink flows of one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisReport {
    pub program: String,
    pub strategy: String,
    pub events: usize,
    pub counters: FlowCount,
    pub flows: Vec<FlowReport>,
    pub unique_flows: Vec<UniqueFlow>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Malformed(#[from] MalformedTrace),
    #[error(transparent)]
    Endpoint(#[from] SubtraceError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Analyzes every connected source/sink location pair of `t`, or only
/// `endpoints` when given (reported even if unconnected).
pub fn analyze(t: &Trace, endpoints: Option<(Loc, Loc)>) -> Result<AnalysisReport, AnalysisError> {
    let counters = interpret_trace(t)?.counters;
    let g = build_edg(t)?;
    let requested = endpoints.is_some();
    let pairs: Vec<(Loc, Loc)> = match endpoints {
        Some(p) => vec![p],
        None => {
            let (sources, sinks) = endpoint_locs(t);
            sources
                .iter()
                .flat_map(|s| sinks.iter().map(move |k| (s.clone(), k.clone())))
                .collect()
        }
    };
    let mut flows = Vec::new();
    let mut classified = Vec::new();
    for (source, sink) in pairs {
        let keep = source_to_sink_indices(&g, t, &source, &sink)?;
        if keep.is_empty() && !requested {
            continue;
        }
        let sub = t.select(keep.iter().copied());
        let classification = if sub.is_empty() {
            None
        } else {
            Some(classify_subtrace(&sub)?)
        };
        if let Some(c) = classification {
            classified.push((sub, c));
        }
        flows.push(FlowReport {
            source,
            sink,
            events: keep.into_iter().collect(),
            classification,
            detectable_by: classification
                .map(|c| Strategy::ALL.into_iter().filter(|s| detectable_by(c, *s)).collect())
                .unwrap_or_default(),
        });
    }
    Ok(AnalysisReport {
        program: t.program.clone(),
        strategy: t.strategy.clone(),
        events: t.len(),
        counters,
        flows,
        unique_flows: unique_flows(&classified),
    })
}
