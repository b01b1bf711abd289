//! The room registry and every state change the relay can make.
//!
//! Each room sits behind its own mutex, so joins, fan-out bookkeeping, lock
//! and close are serialized per room while separate rooms proceed in
//! parallel. Fan-out pushes onto unbounded per-connection queues while the
//! room lock is held, which fixes one delivery order for every recipient.
//! Locks are always taken room first, then registry, never the reverse.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use blindroom_core::{encode_wire, AdminAction, EncryptedEnvelope, ErrorCode, NotifyEvent, RoomId, SessionId, WireMessage};
use serde_json::json;
use tokio::sync::mpsc;

use crate::admin::{tokens_match, ComparisonCounter};
use crate::clock::Clock;
use crate::config::RelayConfig;
use crate::log::{emit, LogSink};
use crate::metrics::{Counters, MetricsSnapshot};
use crate::tap::IngressTap;

/// What a connection's writer task receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Frame(Arc<str>),
    Close,
}

pub type Outbox = mpsc::UnboundedSender<Outbound>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RelayError {
    #[error("room not found")]
    RoomNotFound,
    #[error("room is locked")]
    RoomLocked,
    #[error("room is full")]
    RoomFull,
    #[error("room already exists")]
    RoomConflict,
    #[error("relay is at room capacity")]
    Capacity,
    #[error("admin token rejected")]
    Unauthorized,
    #[error("not a member of this room")]
    NotAMember,
    #[error("payload exceeds the relay's message limit")]
    PayloadTooLarge,
}

impl RelayError {
    pub fn code(self) -> ErrorCode {
        match self {
            RelayError::RoomNotFound => ErrorCode::RoomNotFound,
            RelayError::RoomLocked => ErrorCode::RoomLocked,
            RelayError::RoomFull => ErrorCode::RoomFull,
            RelayError::RoomConflict => ErrorCode::RoomConflict,
            RelayError::Capacity => ErrorCode::Capacity,
            RelayError::Unauthorized => ErrorCode::Unauthorized,
            RelayError::NotAMember => ErrorCode::NotAMember,
            RelayError::PayloadTooLarge => ErrorCode::PayloadTooLarge,
        }
    }

    pub fn to_wire(self) -> WireMessage {
        WireMessage::error(self.code(), self.to_string())
    }
}

struct Member {
    session: SessionId,
    outbox: Outbox,
}

struct RoomRecord {
    room_id: RoomId,
    encrypted_admin_token: EncryptedEnvelope,
    members: Vec<Member>,
    locked: bool,
    created_at: Duration,
    last_activity: Duration,
    messages_relayed: u64,
    bytes_relayed: u64,
    /// Set when the record has left the registry; holders of a stale handle treat it as gone.
    wiped: bool,
}

impl RoomRecord {
    fn send_all(&self, frame: &Arc<str>, except: Option<SessionId>) -> usize {
        let mut sent = 0;
        for m in self.members.iter().filter(|m| Some(m.session) != except) {
            // A closed queue means the connection is going away; its leave will follow.
            if m.outbox.send(Outbound::Frame(frame.clone())).is_ok() {
                sent += 1;
            }
        }
        sent
    }

    fn is_member(&self, session: SessionId) -> bool {
        self.members.iter().any(|m| m.session == session)
    }
}

type RoomHandle = Arc<Mutex<RoomRecord>>;

struct Inner {
    config: RelayConfig,
    clock: Arc<dyn Clock>,
    log: Arc<dyn LogSink>,
    tap: Option<Arc<dyn IngressTap>>,
    rooms: Mutex<HashMap<RoomId, RoomHandle>>,
    counters: Counters,
    comparisons: ComparisonCounter,
}

/// The relay. Cloning shares the same registry.
#[derive(Clone)]
pub struct Relay(Arc<Inner>);

fn frame(msg: &WireMessage) -> Arc<str> {
    encode_wire(msg).into()
}

fn notify(event: NotifyEvent, session_id: Option<SessionId>) -> Arc<str> {
    frame(&WireMessage::Notify { event, session_id })
}

impl Relay {
    pub fn new(config: RelayConfig, clock: Arc<dyn Clock>, log: Arc<dyn LogSink>) -> Self {
        Self(Arc::new(Inner {
            config,
            clock,
            log,
            tap: None,
            rooms: Mutex::new(HashMap::new()),
            counters: Counters::default(),
            comparisons: ComparisonCounter::default(),
        }))
    }

    /// Installs an inspection hook on inbound frames. Only sabotage builds in tests use this.
    pub fn with_tap(config: RelayConfig, clock: Arc<dyn Clock>, log: Arc<dyn LogSink>, tap: Arc<dyn IngressTap>) -> Self {
        let relay = Self::new(config, clock, log);
        let mut inner = Arc::into_inner(relay.0).expect("fresh relay");
        inner.tap = Some(tap);
        Self(Arc::new(inner))
    }

    pub fn config(&self) -> &RelayConfig {
        &self.0.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.0.clock
    }

    pub(crate) fn counters(&self) -> &Counters {
        &self.0.counters
    }

    /// How many admin token comparisons have run, all through [`tokens_match`].
    pub fn token_comparisons(&self) -> u64 {
        self.0.comparisons.get()
    }

    fn log(&self, event: &str, fields: serde_json::Value) {
        emit(self.0.log.as_ref(), event, fields);
    }

    fn lookup(&self, room_id: &RoomId) -> Option<RoomHandle> {
        self.0.rooms.lock().unwrap().get(room_id).cloned()
    }

    fn ttl_seconds(&self) -> u64 {
        self.0.config.room_ttl.as_secs()
    }

    /// Opens a connection. The receiver yields everything the relay sends to it.
    pub fn connect(&self) -> (Connection, mpsc::UnboundedReceiver<Outbound>) {
        let (tx, rx) = mpsc::unbounded_channel();
        (Connection { relay: self.clone(), outbox: tx, attached: None }, rx)
    }

    pub fn create_room(&self, room_id: RoomId, token: EncryptedEnvelope, outbox: &Outbox) -> Result<SessionId, RelayError> {
        let now = self.0.clock.now();
        let session = SessionId::generate();
        let mut rooms = self.0.rooms.lock().unwrap();
        if rooms.contains_key(&room_id) {
            drop(rooms);
            self.log("create_rejected", json!({ "code": ErrorCode::RoomConflict.as_str() }));
            return Err(RelayError::RoomConflict);
        }
        if rooms.len() >= self.0.config.max_rooms {
            drop(rooms);
            self.log("create_rejected", json!({ "code": ErrorCode::Capacity.as_str() }));
            return Err(RelayError::Capacity);
        }
        let token_bytes = token.len();
        let record = RoomRecord {
            room_id,
            encrypted_admin_token: token,
            members: vec![Member { session, outbox: outbox.clone() }],
            locked: false,
            created_at: now,
            last_activity: now,
            messages_relayed: 0,
            bytes_relayed: 0,
            wiped: false,
        };
        // Joined goes out before the room is visible, so it precedes anything else this member receives.
        let joined = WireMessage::Joined { session_id: session, member_count: 1, locked: false, ttl_seconds: Some(self.ttl_seconds()) };
        let _ = outbox.send(Outbound::Frame(frame(&joined)));
        rooms.insert(room_id, Arc::new(Mutex::new(record)));
        let active = rooms.len();
        drop(rooms);
        Counters::bump(&self.0.counters.rooms_created, 1);
        self.log("room_created", json!({ "token_bytes": token_bytes, "active_rooms": active }));
        Ok(session)
    }

    pub fn join(&self, room_id: RoomId, outbox: &Outbox) -> Result<SessionId, RelayError> {
        let result = self.try_join(room_id, outbox);
        match &result {
            Ok(_) => {}
            Err(e) => self.log("join_rejected", json!({ "code": e.code().as_str() })),
        }
        result
    }

    fn try_join(&self, room_id: RoomId, outbox: &Outbox) -> Result<SessionId, RelayError> {
        let handle = self.lookup(&room_id).ok_or(RelayError::RoomNotFound)?;
        let mut room = handle.lock().unwrap();
        if room.wiped {
            return Err(RelayError::RoomNotFound);
        }
        if room.locked {
            return Err(RelayError::RoomLocked);
        }
        if room.members.len() >= self.0.config.max_members_per_room {
            return Err(RelayError::RoomFull);
        }
        let session = SessionId::generate();
        room.send_all(&notify(NotifyEvent::PeerJoined, Some(session)), None);
        room.members.push(Member { session, outbox: outbox.clone() });
        room.last_activity = self.0.clock.now();
        let count = room.members.len();
        let joined = WireMessage::Joined {
            session_id: session,
            member_count: count as u32,
            locked: room.locked,
            ttl_seconds: Some(self.ttl_seconds()),
        };
        let _ = outbox.send(Outbound::Frame(frame(&joined)));
        drop(room);
        self.log("joined", json!({ "members": count }));
        Ok(session)
    }

    /// Fans the payload out to every other member and keeps nothing of it.
    pub fn relay_broadcast(&self, room_id: RoomId, sender: SessionId, payload: EncryptedEnvelope) -> Result<usize, RelayError> {
        let bytes = payload.len();
        if bytes > self.0.config.max_message_bytes {
            self.log("relay_rejected", json!({ "code": ErrorCode::PayloadTooLarge.as_str(), "bytes": bytes }));
            return Err(RelayError::PayloadTooLarge);
        }
        let handle = self.lookup(&room_id).ok_or(RelayError::RoomNotFound)?;
        let mut room = handle.lock().unwrap();
        if room.wiped {
            return Err(RelayError::RoomNotFound);
        }
        if !room.is_member(sender) {
            return Err(RelayError::NotAMember);
        }
        let deliver = frame(&WireMessage::Deliver { sender, payload });
        let delivered = room.send_all(&deliver, Some(sender));
        room.messages_relayed += 1;
        room.bytes_relayed += bytes as u64;
        room.last_activity = self.0.clock.now();
        drop(room);
        Counters::bump(&self.0.counters.messages_relayed, 1);
        Counters::bump(&self.0.counters.bytes_relayed, bytes as u64);
        self.log("relayed", json!({ "bytes": bytes, "delivered": delivered }));
        Ok(delivered)
    }

    pub fn admin_action(
        &self,
        room_id: RoomId,
        presenter: SessionId,
        presented_token: &EncryptedEnvelope,
        action: AdminAction,
    ) -> Result<(), RelayError> {
        let handle = self.lookup(&room_id).ok_or(RelayError::RoomNotFound)?;
        let mut room = handle.lock().unwrap();
        if room.wiped {
            return Err(RelayError::RoomNotFound);
        }
        if !room.is_member(presenter) {
            return Err(RelayError::NotAMember);
        }
        room.last_activity = self.0.clock.now();
        let action_name = match action {
            AdminAction::Lock => "lock",
            AdminAction::Close => "close",
        };
        if !tokens_match(&room.encrypted_admin_token, presented_token, &self.0.comparisons) {
            drop(room);
            self.log("admin", json!({ "action": action_name, "ok": false }));
            return Err(RelayError::Unauthorized);
        }
        match action {
            AdminAction::Lock => {
                room.locked = true;
                room.send_all(&notify(NotifyEvent::Locked, None), None);
                drop(room);
            }
            AdminAction::Close => {
                self.wipe(&handle, &mut room, "close");
            }
        }
        self.log("admin", json!({ "action": action_name, "ok": true }));
        Ok(())
    }

    /// Disconnects everyone and drops the record. Caller holds the room lock.
    fn wipe(&self, handle: &RoomHandle, room: &mut RoomRecord, reason: &str) {
        room.send_all(&notify(NotifyEvent::Closing, None), None);
        for m in &room.members {
            let _ = m.outbox.send(Outbound::Close);
        }
        let members = room.members.len();
        let lifetime_ms = self.0.clock.now().saturating_sub(room.created_at).as_millis() as u64;
        let (messages, bytes) = (room.messages_relayed, room.bytes_relayed);
        room.members.clear();
        room.wiped = true;
        {
            let mut rooms = self.0.rooms.lock().unwrap();
            if rooms.get(&room.room_id).is_some_and(|h| Arc::ptr_eq(h, handle)) {
                rooms.remove(&room.room_id);
            }
        }
        Counters::bump(&self.0.counters.rooms_wiped, 1);
        self.log(
            "wiped",
            json!({ "reason": reason, "members": members, "messages": messages, "bytes": bytes, "lifetime_ms": lifetime_ms }),
        );
    }

    /// Removes a member whose connection ended. The room itself stays until close or expiry.
    pub fn leave(&self, room_id: RoomId, session: SessionId) {
        let Some(handle) = self.lookup(&room_id) else { return };
        let mut room = handle.lock().unwrap();
        if room.wiped || !room.is_member(session) {
            return;
        }
        room.members.retain(|m| m.session != session);
        room.send_all(&notify(NotifyEvent::PeerLeft, Some(session)), None);
        let count = room.members.len();
        drop(room);
        self.log("left", json!({ "members": count }));
    }

    /// Wipes every room idle for longer than the TTL at `now`.
    pub fn expire_rooms(&self, now: Duration) -> Vec<RoomId> {
        let handles: Vec<RoomHandle> = self.0.rooms.lock().unwrap().values().cloned().collect();
        let ttl = self.0.config.room_ttl;
        let mut wiped = Vec::new();
        for handle in handles {
            let mut room = handle.lock().unwrap();
            if !room.wiped && now.saturating_sub(room.last_activity) > ttl {
                let id = room.room_id;
                self.wipe(&handle, &mut room, "ttl");
                wiped.push(id);
            }
        }
        self.log("sweep", json!({ "wiped": wiped.len() }));
        wiped
    }

    /// Wipes every room, as on shutdown.
    pub fn wipe_all(&self, reason: &str) -> usize {
        let handles: Vec<RoomHandle> = self.0.rooms.lock().unwrap().values().cloned().collect();
        let mut n = 0;
        for handle in handles {
            let mut room = handle.lock().unwrap();
            if !room.wiped {
                self.wipe(&handle, &mut room, reason);
                n += 1;
            }
        }
        n
    }

    pub fn sweep(&self) -> Vec<RoomId> {
        self.expire_rooms(self.0.clock.now())
    }

    pub fn room_count(&self) -> usize {
        self.0.rooms.lock().unwrap().len()
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.0.counters.snapshot(self.room_count() as u64)
    }

    /// Everything the relay holds, as JSON: every room record plus the metrics.
    /// Audits scan this for key or plaintext material.
    pub fn state_dump(&self) -> String {
        let handles: Vec<RoomHandle> = self.0.rooms.lock().unwrap().values().cloned().collect();
        let mut rooms: Vec<serde_json::Value> = handles
            .iter()
            .map(|h| {
                let r = h.lock().unwrap();
                json!({
                    "room_id": r.room_id,
                    "encrypted_admin_token": r.encrypted_admin_token.to_base64(),
                    "members": r.members.iter().map(|m| m.session).collect::<Vec<_>>(),
                    "locked": r.locked,
                    "created_at_ms": r.created_at.as_millis() as u64,
                    "last_activity_ms": r.last_activity.as_millis() as u64,
                    "messages_relayed": r.messages_relayed,
                    "bytes_relayed": r.bytes_relayed,
                })
            })
            .collect();
        rooms.sort_by(|a, b| a["room_id"].as_str().cmp(&b["room_id"].as_str()));
        json!({ "rooms": rooms, "metrics": self.metrics() }).to_string()
    }
}

/// One client's view of the relay: either not yet in a room, or attached to one.
pub struct Connection {
    relay: Relay,
    outbox: Outbox,
    attached: Option<(RoomId, SessionId)>,
}

impl Connection {
    pub fn session(&self) -> Option<(RoomId, SessionId)> {
        self.attached
    }

    fn reply(&self, msg: WireMessage) {
        let _ = self.outbox.send(Outbound::Frame(frame(&msg)));
    }

    fn reply_err(&self, e: RelayError) {
        self.reply(e.to_wire());
    }

    /// Handles one inbound text frame. Replies and fan-out go to the outboxes.
    pub fn handle_text(&mut self, text: &str) {
        let msg = match blindroom_core::decode_wire(text) {
            Ok(m) => m,
            Err(e) => {
                self.relay.log("bad_frame", json!({ "bytes": text.len() }));
                return self.reply(WireMessage::error(ErrorCode::Protocol, e.to_string()));
            }
        };
        if let Some(tap) = &self.relay.0.tap {
            tap.inspect(&msg, self.relay.0.log.as_ref());
        }
        match (msg, self.attached) {
            (WireMessage::CreateRoom { room_id, encrypted_admin_token }, None) => {
                match self.relay.create_room(room_id, encrypted_admin_token, &self.outbox) {
                    Ok(s) => self.attached = Some((room_id, s)),
                    Err(e) => self.reply_err(e),
                }
            }
            (WireMessage::Join { room_id }, None) => match self.relay.join(room_id, &self.outbox) {
                Ok(s) => self.attached = Some((room_id, s)),
                Err(e) => self.reply_err(e),
            },
            (WireMessage::CreateRoom { .. } | WireMessage::Join { .. }, Some(_)) => {
                self.reply(WireMessage::error(ErrorCode::Protocol, "connection is already in a room"))
            }
            (WireMessage::Relay { payload }, Some((room, me))) => {
                if let Err(e) = self.relay.relay_broadcast(room, me, payload) {
                    self.reply_err(e);
                }
            }
            (WireMessage::Admin { action, presented_token }, Some((room, me))) => {
                if let Err(e) = self.relay.admin_action(room, me, &presented_token, action) {
                    self.reply_err(e);
                }
            }
            (WireMessage::Relay { .. } | WireMessage::Admin { .. }, None) => self.reply_err(RelayError::NotAMember),
            (other, _) => {
                let detail = format!("{} frames are sent by the relay, not to it", other.type_name());
                self.reply(WireMessage::error(ErrorCode::Protocol, detail));
            }
        }
    }

    /// Binary frames are not part of the protocol.
    pub fn handle_binary(&mut self, len: usize) {
        self.relay.log("bad_frame", json!({ "bytes": len }));
        self.reply(WireMessage::error(ErrorCode::Protocol, "frames must be JSON text"));
    }

    pub fn disconnect(self) {
        if let Some((room, me)) = self.attached {
            self.relay.leave(room, me);
        }
    }
}
