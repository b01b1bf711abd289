//! The append-only ceremony timeline kept by every participant.

use std::collections::BTreeMap;

use blindroom_core::SessionId;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RoomCreated,
    PeerJoined,
    PeerLeft,
    Locked,
    PsbtReceived,
    PsbtSubmitted,
    QuorumReached,
    TxBroadcast,
    RoomClosed,
}

/// One timeline entry. `detail` holds small metadata only: fingerprints,
/// counts, txids. Never key material or PSBT bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub kind: EventKind,
    pub at: DateTime<Utc>,
    pub session_id: Option<SessionId>,
    pub detail: BTreeMap<String, Value>,
}

impl EventRecord {
    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("kind".into(), serde_json::to_value(self.kind).expect("enum serializes"));
        obj.insert("at".into(), Value::from(rfc3339(self.at)));
        if let Some(s) = self.session_id {
            obj.insert("session_id".into(), Value::from(s.to_string()));
        }
        if !self.detail.is_empty() {
            obj.insert("detail".into(), Value::Object(self.detail.clone().into_iter().collect()));
        }
        Value::Object(obj)
    }
}

pub fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: EventRecord) {
        self.records.push(record);
    }

    pub(crate) fn pop(&mut self) -> Option<EventRecord> {
        self.records.pop()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn kinds(&self) -> Vec<EventKind> {
        self.records.iter().map(|r| r.kind).collect()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }
}
