//! Append-only event log with JSON-lines export.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::runtime::message::Message;

/// One logged event. `loss` is present only on loss-bearing messages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: String,
    pub from: String,
    pub to: String,
    pub bytes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

/// Append-only log; timestamps are non-decreasing by construction since
/// the clock never runs backwards.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<Event>,
    /// When set, every delivered payload is also serialized here; used by
    /// the privacy check to scan exactly what messages can emit.
    capture: Option<Vec<u8>>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn with_payload_capture() -> Self {
        EventLog {
            events: Vec::new(),
            capture: Some(Vec::new()),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn captured_payloads(&self) -> Option<&[u8]> {
        self.capture.as_deref()
    }

    pub(crate) fn record_message(&mut self, t: f64, msg: &Message) {
        debug_assert!(self.events.last().is_none_or(|e| e.t <= t));
        if let Some(buf) = &mut self.capture {
            msg.payload.write_bytes(buf);
        }
        self.events.push(Event {
            t,
            kind: msg.payload.kind().to_string(),
            from: msg.sender.label(),
            to: msg.receiver.label(),
            bytes: msg.payload_bytes(),
            loss: msg.payload.loss(),
        });
    }

    pub(crate) fn record_warning(&mut self, t: f64, from: String, to: String) {
        self.events.push(Event {
            t,
            kind: "warning".to_string(),
            from,
            to,
            bytes: 0,
            loss: None,
        });
    }

    /// One JSON object per line: `{t, kind, from, to, bytes, loss?}`.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for event in &self.events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
