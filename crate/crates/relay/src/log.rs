//! Relay log lines. Every line is a small JSON object of counts, sizes and
//! timings; room ids, session ids and payload bytes are never written.

use std::sync::{Arc, Mutex};

use serde_json::Value;

pub trait LogSink: Send + Sync {
    fn write(&self, line: &str);
}

/// Forwards lines to `tracing` at info level.
#[derive(Debug, Default)]
pub struct TracingLog;

impl LogSink for TracingLog {
    fn write(&self, line: &str) {
        tracing::info!(target: "blindroom_relay", "{line}");
    }
}

/// Keeps every line in memory, for audits.
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    lines: Arc<Mutex<Vec<String>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap().clone()
    }
}

impl LogSink for MemoryLog {
    fn write(&self, line: &str) {
        self.lines.lock().unwrap().push(line.to_owned());
    }
}

/// Sends each line to several sinks.
pub struct Tee(pub Vec<Arc<dyn LogSink>>);

impl LogSink for Tee {
    fn write(&self, line: &str) {
        for sink in &self.0 {
            sink.write(line);
        }
    }
}

pub(crate) fn emit(sink: &dyn LogSink, event: &str, mut fields: Value) {
    if let Value::Object(map) = &mut fields {
        map.insert("event".into(), Value::from(event));
    }
    sink.write(&fields.to_string());
}
