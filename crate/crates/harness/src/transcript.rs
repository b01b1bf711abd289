//! Everything a run produced, as bytes, in order.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use blindroom_client::FrameObserver;
use blindroom_relay::{MetricsSnapshot, Relay};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameEntry {
    pub ceremony: u64,
    pub client: String,
    pub direction: Direction,
    pub text: String,
}

/// Relay-side state captured at a named moment.
#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub label: String,
    pub state_dump: String,
    pub metrics: MetricsSnapshot,
    pub metrics_json: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HttpEntry {
    pub visitor: usize,
    pub path: String,
    pub status: u16,
    pub cache_control: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpgradeEntry {
    pub visitor: Option<usize>,
    pub cache_control: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Transcript {
    pub frames: Vec<FrameEntry>,
    pub relay_log: Vec<String>,
    pub checkpoints: Vec<Checkpoint>,
    pub http: Vec<HttpEntry>,
    pub upgrades: Vec<UpgradeEntry>,
    pub visitors: usize,
}

impl Transcript {
    /// Hash of the run's shape: per-client frame sequences with identifiers,
    /// ciphertexts and timestamps removed. Equal seeds give equal values.
    pub fn shape_fingerprint(&self) -> String {
        let mut per_client: BTreeMap<(u64, &str), Vec<String>> = BTreeMap::new();
        for f in &self.frames {
            per_client.entry((f.ceremony, &f.client)).or_default().push(format!("{:?} {}", f.direction, normalize(&f.text)));
        }
        let mut h = Sha256::new();
        for ((ceremony, client), frames) in per_client {
            h.update(format!("{ceremony}/{client}\n"));
            for f in frames {
                h.update(f);
                h.update("\n");
            }
        }
        hex::encode(h.finalize())
    }
}

/// Keeps the message type, events and codes; drops everything random.
fn normalize(frame: &str) -> String {
    let Ok(Value::Object(map)) = serde_json::from_str::<Value>(frame) else {
        return "undecodable".into();
    };
    let keep = ["type", "event", "code", "action", "locked", "member_count"];
    let mut parts = Vec::new();
    for k in keep {
        if let Some(v) = map.get(k) {
            parts.push(format!("{k}={v}"));
        }
    }
    parts.join(" ")
}

/// Serializes appends from every simulated client into one transcript.
#[derive(Debug, Clone, Default)]
pub struct Collector(Arc<Mutex<Transcript>>);

impl Collector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observer(&self, ceremony: u64, client: impl Into<String>) -> Arc<dyn FrameObserver> {
        Arc::new(ClientTap { collector: self.clone(), ceremony, client: client.into() })
    }

    pub fn checkpoint(&self, relay: &Relay, label: impl Into<String>) {
        let metrics = relay.metrics();
        let metrics_json = serde_json::to_string(&metrics).expect("metrics serialize");
        let cp = Checkpoint { label: label.into(), state_dump: relay.state_dump(), metrics, metrics_json };
        self.0.lock().unwrap().checkpoints.push(cp);
    }

    pub fn http(&self, entry: HttpEntry) {
        self.0.lock().unwrap().http.push(entry);
    }

    pub fn upgrade(&self, entry: UpgradeEntry) {
        self.0.lock().unwrap().upgrades.push(entry);
    }

    pub fn visitor(&self) -> usize {
        let mut t = self.0.lock().unwrap();
        t.visitors += 1;
        t.visitors - 1
    }

    pub fn relay_log(&self, lines: Vec<String>) {
        self.0.lock().unwrap().relay_log.extend(lines);
    }

    pub fn snapshot(&self) -> Transcript {
        self.0.lock().unwrap().clone()
    }
}

struct ClientTap {
    collector: Collector,
    ceremony: u64,
    client: String,
}

impl ClientTap {
    fn push(&self, direction: Direction, text: &str) {
        let entry = FrameEntry { ceremony: self.ceremony, client: self.client.clone(), direction, text: text.to_owned() };
        self.collector.0.lock().unwrap().frames.push(entry);
    }
}

impl FrameObserver for ClientTap {
    fn sent(&self, text: &str) {
        self.push(Direction::Sent, text);
    }

    fn received(&self, text: &str) {
        self.push(Direction::Received, text);
    }
}
