//! iFlow traces: data model, JSON Lines files, offline interpretation,
//! event dependence graphs and source-to-sink flows.

mod classify;
mod edg;
mod event;
mod interpret;
mod io;
mod report;

pub use classify::{classify_subtrace, detectable_by, unique_flows, ClassifyError, SubtraceClassification, UniqueFlow};
pub use edg::{
    all_subtraces, build_edg, endpoint_locs, source_to_sink_indices, source_to_sink_subtrace, EventDependenceGraph,
    SubtraceError,
};
pub use event::{IFlowEvent, Trace, ValueInfo};
pub use interpret::{check_values, interpret_trace, Interpretation, MalformedTrace, Snapshot};
pub use io::{from_jsonl, read_trace, to_jsonl, write_trace, TraceIoError, FORMAT_VERSION};
pub use report::{analyze, AnalysisError, AnalysisReport, FlowReport};
