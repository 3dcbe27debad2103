//! Execution traces and their newline-delimited JSON export.
//!
//! A trace is the ordered list of events of one transaction. Every event carries
//! a logical timestamp; timestamps strictly increase. Frames are reconstructed
//! from their enter/exit events by [`ExecutionTrace::frames`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{Address, CallKind, FrameStatus, FunctionId, Word};

/// Frame data known at entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub frame_id: u32,
    pub parent: Option<u32>,
    pub call_kind: CallKind,
    pub caller: Address,
    pub code_address: Address,
    pub context: Address,
    pub value: Word,
    pub function: FunctionId,
    pub static_flag: bool,
    pub gas_limit: u64,
    pub args: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TraceEvent {
    FrameEnter(FrameInfo),
    FrameExit {
        frame_id: u32,
        status: FrameStatus,
        gas_used: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    StorageRead {
        frame_id: u32,
        context: Address,
        slot: Word,
        value: Word,
    },
    StorageWrite {
        frame_id: u32,
        context: Address,
        slot: Word,
        old: Word,
        new: Word,
    },
    ValueTransfer {
        frame_id: u32,
        from: Address,
        to: Address,
        amount: Word,
    },
    LogEmitted {
        frame_id: u32,
        topics: u8,
    },
}

impl TraceEvent {
    pub fn frame_id(&self) -> u32 {
        match self {
            TraceEvent::FrameEnter(info) => info.frame_id,
            TraceEvent::FrameExit { frame_id, .. }
            | TraceEvent::StorageRead { frame_id, .. }
            | TraceEvent::StorageWrite { frame_id, .. }
            | TraceEvent::ValueTransfer { frame_id, .. }
            | TraceEvent::LogEmitted { frame_id, .. } => *frame_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

/// Export line declaring which behavior template governs a storage context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BindingLine {
    kind: String,
    address: Address,
    template: String,
}

/// Export line naming the variable behind a storage slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelLine {
    kind: String,
    context: Address,
    slot: Word,
    name: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionTrace {
    pub events: Vec<TraceRecord>,
    /// Storage context -> template name of the code that owns its layout.
    pub bindings: BTreeMap<Address, String>,
    /// (context, slot) -> declared variable name, for slots touched through
    /// a behavior's named storage helpers.
    pub labels: BTreeMap<(Address, Word), String>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A frame reconstructed from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub info: FrameInfo,
    pub enter_time: u64,
    pub exit_time: u64,
    pub status: FrameStatus,
    pub gas_used: u64,
    pub reason: Option<String>,
    pub children: Vec<u32>,
}

impl ExecutionTrace {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        for (address, template) in &self.bindings {
            let line = BindingLine { kind: "Binding".into(), address: *address, template: template.clone() };
            serde_json::to_writer(&mut out, &line).map_err(|e| TraceError::Malformed(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        for ((context, slot), name) in &self.labels {
            let line = LabelLine { kind: "Label".into(), context: *context, slot: *slot, name: name.clone() };
            serde_json::to_writer(&mut out, &line).map_err(|e| TraceError::Malformed(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        for record in &self.events {
            serde_json::to_writer(&mut out, record).map_err(|e| TraceError::Malformed(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses an export and checks that it is well formed.
    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self, TraceError> {
        let mut trace = ExecutionTrace::default();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)
                .map_err(|e| TraceError::Parse { line: lineno, message: e.to_string() })?;
            let parse_err = |e: serde_json::Error| TraceError::Parse { line: lineno, message: e.to_string() };
            let kind = value.get("kind").and_then(|k| k.as_str());
            if kind == Some("Binding") {
                let binding: BindingLine = serde_json::from_value(value).map_err(parse_err)?;
                trace.bindings.insert(binding.address, binding.template);
            } else if kind == Some("Label") {
                let label: LabelLine = serde_json::from_value(value).map_err(parse_err)?;
                trace.labels.insert((label.context, label.slot), label.name);
            } else {
                let record: TraceRecord = serde_json::from_value(value)
                    .map_err(|e| TraceError::Parse { line: lineno, message: e.to_string() })?;
                trace.events.push(record);
            }
        }
        trace.frames()?;
        Ok(trace)
    }

    pub fn from_ndjson(text: &str) -> Result<Self, TraceError> {
        Self::read_ndjson(text.as_bytes())
    }

    /// Rebuilds frames, checking strictly increasing time and balanced,
    /// properly nested enter/exit brackets.
    pub fn frames(&self) -> Result<BTreeMap<u32, FrameRecord>, TraceError> {
        let mut frames: BTreeMap<u32, FrameRecord> = BTreeMap::new();
        let mut stack: Vec<u32> = Vec::new();
        let mut last_time: Option<u64> = None;
        for record in &self.events {
            if let Some(prev) = last_time {
                if record.time <= prev {
                    return Err(TraceError::Malformed(format!("time {} does not increase", record.time)));
                }
            }
            last_time = Some(record.time);
            match &record.event {
                TraceEvent::FrameEnter(info) => {
                    if frames.contains_key(&info.frame_id) {
                        return Err(TraceError::Malformed(format!("frame {} entered twice", info.frame_id)));
                    }
                    if info.parent != stack.last().copied() {
                        return Err(TraceError::Malformed(format!(
                            "frame {} parent {:?} is not the open frame {:?}",
                            info.frame_id,
                            info.parent,
                            stack.last()
                        )));
                    }
                    if let Some(parent) = info.parent {
                        frames.get_mut(&parent).expect("open parent").children.push(info.frame_id);
                    }
                    stack.push(info.frame_id);
                    frames.insert(
                        info.frame_id,
                        FrameRecord {
                            info: info.clone(),
                            enter_time: record.time,
                            exit_time: 0,
                            status: FrameStatus::Open,
                            gas_used: 0,
                            reason: None,
                            children: Vec::new(),
                        },
                    );
                }
                TraceEvent::FrameExit { frame_id, status, gas_used, reason } => {
                    if stack.pop() != Some(*frame_id) {
                        return Err(TraceError::Malformed(format!("unbalanced exit of frame {frame_id}")));
                    }
                    if *status == FrameStatus::Open {
                        return Err(TraceError::Malformed(format!("frame {frame_id} exits with open status")));
                    }
                    let frame = frames.get_mut(frame_id).expect("entered");
                    frame.exit_time = record.time;
                    frame.status = *status;
                    frame.gas_used = *gas_used;
                    frame.reason = reason.clone();
                }
                other => {
                    let id = other.frame_id();
                    if stack.last() != Some(&id) {
                        return Err(TraceError::Malformed(format!(
                            "event at time {} belongs to frame {id} which is not executing",
                            record.time
                        )));
                    }
                }
            }
        }
        if let Some(open) = stack.last() {
            return Err(TraceError::Malformed(format!("frame {open} never exits")));
        }
        Ok(frames)
    }
}
