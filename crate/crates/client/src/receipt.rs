//! The Forced Exit audit receipt.
//!
//! Canonical form is compact UTF-8 JSON with object keys sorted
//! lexicographically (by UTF-8 bytes), no insignificant whitespace, and
//! integers only. `receipt_hash` is the SHA-256 of the canonical text of the
//! receipt without that field; it is then added, and the whole receipt is
//! written canonically.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use blindroom_core::{RoomId, SessionId};
use chrono::{DateTime, Utc};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::events::{rfc3339, EventRecord};

pub const SCHEMA_VERSION: u64 = 1;
pub const NOT_BROADCAST: &str = "not-broadcast";
pub const RECEIPT_EXTENSION: &str = ".receipt.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReceipt {
    pub room_id_hash: String,
    pub events: Vec<EventRecord>,
    pub participants: Vec<SessionId>,
    pub final_psbt_fingerprint: String,
    /// Reversed-hex txid, or [`NOT_BROADCAST`].
    pub txid: String,
    pub generated_at: DateTime<Utc>,
}

pub fn hash_room_id(room: &RoomId) -> String {
    hex::encode(Sha256::digest(room.to_string().as_bytes()))
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_canonical(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            assert!(n.is_i64() || n.is_u64(), "canonical form carries integers only");
            out.push_str(&n.to_string());
        }
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(out, k);
                out.push(':');
                write_canonical(out, v);
            }
            out.push('}');
        }
    }
}

/// Canonical JSON text of any integer-only value.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(&mut out, v);
    out
}

impl AuditReceipt {
    /// Every field except `receipt_hash`.
    pub fn body(&self) -> Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "room_id_hash": self.room_id_hash,
            "events": self.events.iter().map(EventRecord::to_json).collect::<Vec<_>>(),
            "participants": self.participants.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "final_psbt_fingerprint": self.final_psbt_fingerprint,
            "txid": self.txid,
            "generated_at": rfc3339(self.generated_at),
        })
    }

    pub fn receipt_hash(&self) -> String {
        hex::encode(Sha256::digest(canonical_json(&self.body()).as_bytes()))
    }

    /// The receipt document, hash included.
    pub fn to_canonical_json(&self) -> String {
        let mut doc = self.body();
        doc.as_object_mut().expect("object").insert("receipt_hash".into(), Value::from(self.receipt_hash()));
        canonical_json(&doc)
    }

    pub fn file_name(&self) -> String {
        format!("{}{RECEIPT_EXTENSION}", &self.room_id_hash[..16])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReceiptCheckError {
    #[error("receipt is not a JSON object")]
    NotJson,
    #[error("receipt has no receipt_hash")]
    MissingHash,
    #[error("receipt is not in canonical form")]
    NotCanonical,
    #[error("receipt_hash does not match the contents")]
    HashMismatch,
}

/// Checks a receipt document against its embedded hash. Returns the hash.
pub fn verify_receipt(text: &str) -> Result<String, ReceiptCheckError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|_| ReceiptCheckError::NotJson)?;
    if canonical_json(&doc) != text {
        return Err(ReceiptCheckError::NotCanonical);
    }
    let obj = doc.as_object_mut().ok_or(ReceiptCheckError::NotJson)?;
    let claimed = match obj.remove("receipt_hash") {
        Some(Value::String(h)) => h,
        _ => return Err(ReceiptCheckError::MissingHash),
    };
    let actual = hex::encode(Sha256::digest(canonical_json(&doc).as_bytes()));
    if actual != claimed {
        return Err(ReceiptCheckError::HashMismatch);
    }
    Ok(claimed)
}

/// Where a receipt goes before the room may close.
pub trait ReceiptSink: Send {
    fn write(&mut self, receipt: &AuditReceipt) -> io::Result<()>;
}

/// Writes `<receipt_dir>/<room hash prefix>.receipt.json`. Clones share the
/// record of written paths.
#[derive(Debug, Clone)]
pub struct DirSink {
    dir: PathBuf,
    written: Arc<Mutex<Vec<PathBuf>>>,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), written: Arc::default() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> Vec<PathBuf> {
        self.written.lock().unwrap().clone()
    }
}

impl ReceiptSink for DirSink {
    fn write(&mut self, receipt: &AuditReceipt) -> io::Result<()> {
        let path = self.dir.join(receipt.file_name());
        write_file(&path, receipt.to_canonical_json().as_bytes())?;
        self.written.lock().unwrap().push(path);
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

/// Keeps canonical receipt texts in memory. Clones share the list.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    receipts: Arc<Mutex<Vec<String>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn receipts(&self) -> Vec<String> {
        self.receipts.lock().unwrap().clone()
    }
}

impl ReceiptSink for MemorySink {
    fn write(&mut self, receipt: &AuditReceipt) -> io::Result<()> {
        self.receipts.lock().unwrap().push(receipt.to_canonical_json());
        Ok(())
    }
}
