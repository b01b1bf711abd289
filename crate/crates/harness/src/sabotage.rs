//! Deliberately leaky relay taps. A relay built with one of these is the
//! misbehaving server the audits exist to catch.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use blindroom_core::{decrypt, Purpose, RoomId, RoomKey, WireMessage};
use blindroom_relay::{IngressTap, LogSink};

/// Room keys the harness generated, so a sabotage tap can play a relay that
/// somehow obtained them.
#[derive(Clone, Default)]
pub struct KeyRegistry(Arc<Mutex<HashMap<RoomId, RoomKey>>>);

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, room: RoomId, key: RoomKey) {
        self.0.lock().unwrap().insert(room, key);
    }

    fn get(&self, room: &RoomId) -> Option<RoomKey> {
        self.0.lock().unwrap().get(room).cloned()
    }

    fn all(&self) -> Vec<(RoomId, RoomKey)> {
        self.0.lock().unwrap().iter().map(|(r, k)| (*r, k.clone())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sabotage {
    /// Opens relayed payloads and logs the plaintext.
    LogPlaintext,
    /// Logs the room key when a room is created.
    LogKey,
    /// Writes every relayed payload to disk.
    WritePayloads,
}

pub fn tap(kind: Sabotage, keys: KeyRegistry, spill_dir: PathBuf) -> Arc<dyn IngressTap> {
    match kind {
        Sabotage::LogPlaintext => Arc::new(PlaintextLeak { keys }),
        Sabotage::LogKey => Arc::new(KeyLeak { keys }),
        Sabotage::WritePayloads => Arc::new(DiskWrite { dir: spill_dir, seq: AtomicU64::new(0) }),
    }
}

struct PlaintextLeak {
    keys: KeyRegistry,
}

impl IngressTap for PlaintextLeak {
    fn inspect(&self, frame: &WireMessage, log: &dyn LogSink) {
        let WireMessage::Relay { payload } = frame else { return };
        for (room, key) in self.keys.all() {
            if let Ok(plain) = decrypt(&key, &room, Purpose::Psbt, payload) {
                log.write(&format!("{{\"event\":\"debug_payload\",\"hex\":\"{}\"}}", hex::encode(plain)));
                return;
            }
        }
    }
}

struct KeyLeak {
    keys: KeyRegistry,
}

impl IngressTap for KeyLeak {
    fn inspect(&self, frame: &WireMessage, log: &dyn LogSink) {
        let WireMessage::CreateRoom { room_id, .. } = frame else { return };
        if let Some(key) = self.keys.get(room_id) {
            log.write(&format!("{{\"event\":\"debug_room\",\"k\":\"{}\"}}", key.to_fragment()));
        }
    }
}

struct DiskWrite {
    dir: PathBuf,
    seq: AtomicU64,
}

impl IngressTap for DiskWrite {
    fn inspect(&self, frame: &WireMessage, _log: &dyn LogSink) {
        let WireMessage::Relay { payload } = frame else { return };
        let n = self.seq.fetch_add(1, Ordering::SeqCst);
        let _ = fs::create_dir_all(&self.dir);
        let _ = fs::write(self.dir.join(format!("{n}.bin")), payload.as_bytes());
    }
}
