//! The JSON trace format for histories.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "spec": "set",
//!   "support": [1, 2, 3],
//!   "processes": [
//!     {"pid": 1, "events": [
//!       {"kind": "update", "op": "I", "args": [1]},
//!       {"kind": "query", "op": "R", "args": [], "returns": [1], "repeats_forever": true}
//!     ]}
//!   ]
//! }
//! ```
//!
//! Processes are listed in increasing pid order and event ids are implicit:
//! events are numbered from 0 in file order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adt::{spec_by_name, AdtError, AdtSpec, OpKind, Operation, Support, Value};
use crate::history::{History, HistoryBuilder, HistoryError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub schema_version: u32,
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Support>,
    pub processes: Vec<TraceProcess>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceProcess {
    pub pid: u32,
    pub events: Vec<TraceEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub kind: OpKind,
    pub op: String,
    #[serde(default)]
    pub args: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns: Option<Value>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeats_forever: bool,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Adt(#[from] AdtError),
}

impl TraceEvent {
    pub fn label(&self) -> Result<Operation, TraceError> {
        match (self.kind, &self.returns) {
            (OpKind::Update, None) => Ok(Operation::update(self.op.clone(), self.args.clone())),
            (OpKind::Query, Some(ret)) => Ok(Operation::query(self.op.clone(), self.args.clone(), ret.clone())),
            (OpKind::Update, Some(_)) => Err(TraceError::Schema(format!("update `{}` has a returned value", self.op))),
            (OpKind::Query, None) => Err(TraceError::Schema(format!("query `{}` has no returned value", self.op))),
        }
    }
}

impl TraceFile {
    pub fn parse(text: &str) -> Result<TraceFile, TraceError> {
        let trace: TraceFile = serde_json::from_str(text)?;
        trace.validate_shape()?;
        Ok(trace)
    }

    /// Serializes `h`; event ids are dropped and become file positions.
    pub fn from_history(spec: &str, support: Option<Support>, h: &History) -> TraceFile {
        let processes = h
            .pids()
            .into_iter()
            .map(|pid| TraceProcess {
                pid: pid.0,
                events: h
                    .chain(pid)
                    .into_iter()
                    .map(|id| {
                        let e = h.get(id).expect("chain ids exist");
                        TraceEvent {
                            kind: e.label.kind(),
                            op: e.label.name().to_string(),
                            args: e.label.args().to_vec(),
                            returns: e.label.returned().cloned(),
                            repeats_forever: e.repeats_forever,
                        }
                    })
                    .collect(),
            })
            .collect();
        TraceFile {
            schema_version: SCHEMA_VERSION,
            spec: spec.to_string(),
            support,
            processes,
        }
    }

    fn validate_shape(&self) -> Result<(), TraceError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(TraceError::Schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !self.processes.windows(2).all(|w| w[0].pid < w[1].pid) {
            return Err(TraceError::Schema("processes must be listed by strictly increasing pid".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<Arc<dyn AdtSpec>, TraceError> {
        Ok(spec_by_name(&self.spec, self.support.as_ref())?)
    }

    /// Builds the history, checking every label against `spec`.
    pub fn to_history(&self, spec: &dyn AdtSpec) -> Result<History, TraceError> {
        self.validate_shape()?;
        let mut builder = HistoryBuilder::default();
        for p in &self.processes {
            for e in &p.events {
                let label = e.label()?;
                check_label(spec, &label)?;
                builder = if e.repeats_forever {
                    builder.omega(p.pid, label)
                } else {
                    builder.process(p.pid, [label])
                };
            }
        }
        Ok(builder.build()?)
    }

    /// Pretty JSON with a trailing newline; byte-stable for equal traces.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("traces always serialize");
        s.push('\n');
        s
    }
}

/// Whether the specification declares `label`'s operation.
pub fn check_label(spec: &dyn AdtSpec, label: &Operation) -> Result<(), AdtError> {
    let init = spec.initial_state();
    match label.kind() {
        OpKind::Update => spec.transition(&init, label).map(drop),
        OpKind::Query => spec.output(&init, &label.input()).map(drop),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn set_trace(h: &History) -> TraceFile {
        TraceFile::from_history("set", Some(Support::Values(vec![1.into(), 2.into(), 3.into()])), h)
    }

    #[test]
    fn fixtures_round_trip() {
        for name in fixtures::NAMES {
            let h = fixtures::by_name(name).unwrap();
            let trace = set_trace(&h);
            let parsed = TraceFile::parse(&trace.to_json()).unwrap();
            assert_eq!(parsed, trace);
            assert_eq!(parsed.to_history(&*parsed.spec().unwrap()).unwrap(), h);
        }
    }

    #[test]
    fn fig1d_shape() {
        let json = set_trace(&fixtures::fig1d()).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let p2 = &v["processes"][1];
        assert_eq!(p2["pid"], 2);
        assert_eq!(p2["events"][0]["returns"], serde_json::json!([2]));
        assert_eq!(p2["events"][1]["repeats_forever"], true);
        assert!(p2["events"][0].get("repeats_forever").is_none());
    }

    #[test]
    fn rejects_bad_traces() {
        let bad = [
            r#"{"schema_version": 2, "spec": "set", "processes": []}"#,
            r#"{"schema_version": 1, "spec": "set", "processes": [], "extra": 1}"#,
            r#"{"schema_version": 1, "spec": "set", "processes": [{"pid": 2, "events": []}, {"pid": 1, "events": []}]}"#,
            r#"{"schema_version": 1, "spec": "set", "processes": [{"pid": 1, "events": [{"kind": "query", "op": "R"}]}]}"#,
        ];
        for text in bad {
            let parsed = TraceFile::parse(text);
            let built = parsed.and_then(|t| t.to_history(&*t.spec()?));
            assert!(built.is_err(), "{text}");
        }
        let omega_update = r#"{"schema_version": 1, "spec": "set", "processes": [{"pid": 1, "events": [
            {"kind": "update", "op": "I", "args": [1], "repeats_forever": true}]}]}"#;
        let t = TraceFile::parse(omega_update).unwrap();
        assert!(matches!(t.to_history(&*t.spec().unwrap()), Err(TraceError::History(_))));
        let unknown_op = r#"{"schema_version": 1, "spec": "set", "processes": [{"pid": 1, "events": [
            {"kind": "update", "op": "write", "args": ["x", 1]}]}]}"#;
        let t = TraceFile::parse(unknown_op).unwrap();
        assert!(matches!(t.to_history(&*t.spec().unwrap()), Err(TraceError::Adt(_))));
    }

    #[test]
    fn empty_trace_is_empty_history() {
        let t = TraceFile::parse(r#"{"schema_version": 1, "spec": "memory", "processes": []}"#).unwrap();
        assert!(t.to_history(&*t.spec().unwrap()).unwrap().is_empty());
    }
}
