#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use blindroom_core::{decode_wire, encode_wire, AdminAction, EncryptedEnvelope, RoomId, SessionId, WireMessage};
use blindroom_relay::{Connection, ManualClock, MemoryLog, Outbound, Relay, RelayConfig};
use tokio::sync::mpsc::UnboundedReceiver;

pub struct Harness {
    pub relay: Relay,
    pub clock: Arc<ManualClock>,
    pub log: MemoryLog,
}

pub fn harness() -> Harness {
    harness_with(RelayConfig { room_ttl: Duration::from_secs(3600), ..RelayConfig::default() })
}

pub fn harness_with(config: RelayConfig) -> Harness {
    let clock = Arc::new(ManualClock::new());
    let log = MemoryLog::new();
    let relay = Relay::new(config, clock.clone(), Arc::new(log.clone()));
    Harness { relay, clock, log }
}

pub struct Client {
    pub conn: Connection,
    pub rx: UnboundedReceiver<Outbound>,
}

impl Client {
    pub fn new(relay: &Relay) -> Self {
        let (conn, rx) = relay.connect();
        Self { conn, rx }
    }

    pub fn send(&mut self, msg: &WireMessage) {
        self.conn.handle_text(&encode_wire(msg));
    }

    /// Everything queued for this client so far. `None` marks a close.
    pub fn drain(&mut self) -> Vec<Option<WireMessage>> {
        let mut out = Vec::new();
        while let Ok(o) = self.rx.try_recv() {
            out.push(match o {
                Outbound::Frame(f) => Some(decode_wire(&f).unwrap()),
                Outbound::Close => None,
            });
        }
        out
    }

    pub fn drain_raw(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while let Ok(Outbound::Frame(f)) = self.rx.try_recv() {
            out.push(f.to_string());
        }
        out
    }

    pub fn session(&self) -> SessionId {
        self.conn.session().unwrap().1
    }
}

pub fn token(tag: u8) -> EncryptedEnvelope {
    let mut bytes = vec![0x01];
    bytes.extend((0..60).map(|i| i as u8 ^ tag));
    EncryptedEnvelope::from_bytes(bytes)
}

pub fn create(relay: &Relay, room: RoomId) -> Client {
    let mut c = Client::new(relay);
    c.send(&WireMessage::CreateRoom { room_id: room, encrypted_admin_token: token(7) });
    c
}

pub fn join(relay: &Relay, room: RoomId) -> Client {
    let mut c = Client::new(relay);
    c.send(&WireMessage::Join { room_id: room });
    c
}

pub fn admin(action: AdminAction, tag: u8) -> WireMessage {
    WireMessage::Admin { action, presented_token: token(tag) }
}
