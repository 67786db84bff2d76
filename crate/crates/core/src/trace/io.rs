use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::event::{IFlowEvent, Trace, ValueInfo};
use crate::monitor::{Label, ValueId};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct Meta {
    version: u32,
    program: String,
    strategy: String,
}

#[derive(Serialize, Deserialize)]
struct ValLine {
    id: ValueId,
    label: Label,
    show: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "k", rename_all = "lowercase")]
enum Extra {
    Meta(Meta),
    Val(ValLine),
}

/// JSON Lines rendering: a meta header, one line per event, then the value
/// table.
pub fn to_jsonl(t: &Trace) -> String {
    let mut out = String::new();
    let meta = Extra::Meta(Meta {
        version: FORMAT_VERSION,
        program: t.program.clone(),
        strategy: t.strategy.clone(),
    });
    out.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
    out.push('\n');
    for e in &t.events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    for (id, info) in &t.values {
        let line = Extra::Val(ValLine {
            id: *id,
            label: info.label,
            show: info.show.clone(),
        });
        out.push_str(&serde_json::to_string(&line).expect("value serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Trace, TraceIoError> {
    let mut trace: Option<Trace> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| TraceIoError::Format { line, message };
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let kind = value.get("k").and_then(|k| k.as_str()).unwrap_or_default().to_string();
        match (kind.as_str(), trace.as_mut()) {
            ("meta", None) => {
                let Extra::Meta(m) = serde_json::from_value(value).map_err(|e| err(e.to_string()))? else {
                    unreachable!()
                };
                if m.version != FORMAT_VERSION {
                    return Err(err(format!("unsupported trace version {}", m.version)));
                }
                trace = Some(Trace::new(m.program, m.strategy));
            }
            (_, None) => return Err(err("expected a meta header line".to_string())),
            ("meta", Some(_)) => return Err(err("duplicate meta line".to_string())),
            ("val", Some(t)) => {
                let Extra::Val(v) = serde_json::from_value(value).map_err(|e| err(e.to_string()))? else {
                    unreachable!()
                };
                t.values.insert(
                    v.id,
                    ValueInfo {
                        label: v.label,
                        show: v.show,
                    },
                );
            }
            (_, Some(t)) => {
                if !t.values.is_empty() {
                    return Err(err("event after the value table".to_string()));
                }
                let event: IFlowEvent = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                t.events.push(event);
            }
        }
    }
    trace.ok_or(TraceIoError::Format {
        line: 1,
        message: "empty trace file".to_string(),
    })
}

pub fn write_trace(t: &Trace, path: impl AsRef<Path>) -> Result<(), TraceIoError> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(t)).map_err(|source| TraceIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, TraceIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TraceIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_jsonl(&text)
}
