//! Coordinator and guest state machines. They consume wire messages and
//! produce wire messages; the async driver moves those over a socket.

use std::collections::BTreeMap;
use std::sync::Arc;

use blindroom_core::{
    decrypt, encrypt, AdminAction, AdminSecret, EncryptedEnvelope, ErrorCode, NotifyEvent, Purpose, RoomId, RoomKey,
    RoomLink, SessionId, WireMessage,
};
use blindroom_core::redact::REDACTED_FRAGMENT;
use blindroom_psbt::{finalize, progress, FinalTx, Psbt, SignatureProgress, Txid};
use serde_json::{json, Value};

use crate::clock::WallClock;
use crate::credentials::CredentialStore;
use crate::error::SessionError;
use crate::events::{EventKind, EventLog, EventRecord};
use crate::receipt::{hash_room_id, AuditReceipt, ReceiptSink, NOT_BROADCAST};

/// What a handled frame meant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Update {
    Joined { session_id: SessionId, member_count: u32, locked: bool, ttl_seconds: Option<u64> },
    PeerJoined(SessionId),
    PeerLeft(SessionId),
    Progress(SignatureProgress),
    QuorumReached,
    Locked,
    Closing,
    Rejected { code: ErrorCode, detail: String },
    /// A delivery that did not decrypt or parse. Counted and dropped.
    Anomaly,
    /// A delivery that disagrees with the local transaction.
    Conflict(String),
}

#[derive(Debug, Default)]
pub struct Step {
    pub send: Vec<WireMessage>,
    pub updates: Vec<Update>,
}

pub trait Participant {
    fn on_message(&mut self, msg: WireMessage) -> Step;
    fn room_id(&self) -> RoomId;
    fn session_id(&self) -> Option<SessionId>;
}

fn progress_detail(fingerprint: &str, p: Option<&SignatureProgress>) -> BTreeMap<String, Value> {
    let mut d = BTreeMap::new();
    d.insert("fingerprint".into(), Value::from(fingerprint));
    if let Some(p) = p {
        let inputs: Vec<Value> = p.inputs.iter().map(|i| json!([i.have, i.need])).collect();
        d.insert("inputs".into(), Value::from(inputs));
    }
    d
}

/// State shared by both roles.
struct Core {
    room_id: RoomId,
    key: RoomKey,
    base: String,
    session_id: Option<SessionId>,
    current: Option<Psbt>,
    log: EventLog,
    participants: Vec<SessionId>,
    anomalies: u64,
    conflicts: u64,
    quorum: bool,
    txid: Option<Txid>,
    clock: Arc<dyn WallClock>,
}

impl Core {
    fn event(&mut self, kind: EventKind, session_id: Option<SessionId>, detail: BTreeMap<String, Value>) {
        let at = self.clock.now();
        self.log.push(EventRecord { kind, at, session_id, detail });
    }

    fn saw(&mut self, s: SessionId) {
        if !self.participants.contains(&s) {
            self.participants.push(s);
        }
    }

    fn progress(&self) -> Option<SignatureProgress> {
        self.current.as_ref().and_then(|p| progress(p).ok())
    }

    fn fingerprint(&self) -> String {
        self.current.as_ref().map(Psbt::fingerprint_hex).unwrap_or_default()
    }

    /// Appends quorum_reached the first time every input has enough signatures.
    fn check_quorum(&mut self, updates: &mut Vec<Update>) {
        if self.quorum {
            return;
        }
        if self.progress().is_some_and(|p| p.overall_quorum) {
            self.quorum = true;
            self.event(EventKind::QuorumReached, None, BTreeMap::new());
            updates.push(Update::QuorumReached);
        }
    }

    fn seal_current(&self) -> Result<WireMessage, SessionError> {
        let psbt = self.current.as_ref().ok_or(SessionError::NoPsbt)?;
        self.seal(psbt)
    }

    fn seal(&self, psbt: &Psbt) -> Result<WireMessage, SessionError> {
        let payload = encrypt(&self.key, &self.room_id, Purpose::Psbt, &psbt.serialize())?;
        Ok(WireMessage::Relay { payload })
    }

    fn on_deliver(&mut self, sender: SessionId, payload: &EncryptedEnvelope) -> Vec<Update> {
        self.saw(sender);
        let Ok(plain) = decrypt(&self.key, &self.room_id, Purpose::Psbt, payload) else {
            self.anomalies += 1;
            return vec![Update::Anomaly];
        };
        let Ok(incoming) = Psbt::parse(&plain) else {
            self.anomalies += 1;
            return vec![Update::Anomaly];
        };
        let merged = match &self.current {
            None => incoming,
            Some(cur) => match cur.combine(&incoming) {
                Ok(m) => m,
                Err(e) => {
                    self.conflicts += 1;
                    return vec![Update::Conflict(e.to_string())];
                }
            },
        };
        self.current = Some(merged);
        let p = self.progress();
        let detail = progress_detail(&self.fingerprint(), p.as_ref());
        self.event(EventKind::PsbtReceived, Some(sender), detail);
        let mut updates = Vec::new();
        if let Some(p) = p {
            updates.push(Update::Progress(p));
        }
        self.check_quorum(&mut updates);
        updates
    }

    fn submit(&mut self, psbt: &Psbt) -> Result<(WireMessage, Vec<Update>), SessionError> {
        let merged = match &self.current {
            None => psbt.clone(),
            Some(cur) if !cur.same_transaction(psbt) => return Err(SessionError::VersionConflict),
            Some(cur) => cur.combine(psbt)?,
        };
        let frame = self.seal(psbt)?;
        self.current = Some(merged);
        let p = self.progress();
        let detail = progress_detail(&self.fingerprint(), p.as_ref());
        self.event(EventKind::PsbtSubmitted, self.session_id, detail);
        let mut updates = Vec::new();
        if let Some(p) = p {
            updates.push(Update::Progress(p));
        }
        self.check_quorum(&mut updates);
        Ok((frame, updates))
    }

    fn receipt(&self) -> AuditReceipt {
        AuditReceipt {
            room_id_hash: hash_room_id(&self.room_id),
            events: self.log.records().to_vec(),
            participants: self.participants.clone(),
            final_psbt_fingerprint: self.fingerprint(),
            txid: self.txid.map(|t| t.to_string()).unwrap_or_else(|| NOT_BROADCAST.into()),
            generated_at: self.clock.now(),
        }
    }

    fn diagnostic(&self, role: &str, state: &str) -> String {
        let progress = match self.progress() {
            Some(p) => p.inputs.iter().map(|i| format!("{}/{}", i.have, i.need)).collect::<Vec<_>>().join(","),
            None => "-".into(),
        };
        format!(
            "{role} room={}/room/{}{REDACTED_FRAGMENT} state={state} progress=[{progress}] members_seen={} anomalies={}",
            self.base,
            self.room_id,
            self.participants.len(),
            self.anomalies
        )
    }
}

/// The secrets a room is born with.
pub struct RoomMaterial {
    pub room_id: RoomId,
    pub key: RoomKey,
    pub admin_secret: AdminSecret,
}

impl RoomMaterial {
    pub fn generate() -> Self {
        Self { room_id: RoomId::generate(), key: RoomKey::generate(), admin_secret: AdminSecret::generate() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinatorState {
    Created,
    Connected,
    Locked,
    Quorum,
    Broadcast,
    Closed,
}

pub struct CoordinatorSession {
    core: Core,
    admin_secret: AdminSecret,
    credentials: Box<dyn CredentialStore>,
    sink: Box<dyn ReceiptSink>,
    emitted: Option<AuditReceipt>,
    sink_error: Option<String>,
    state: CoordinatorState,
    locked: bool,
}

impl CoordinatorSession {
    /// Creates the room key, admin secret and encrypted token locally and
    /// stores the token. Returns the link and the CreateRoom frame; nothing
    /// has touched the network yet.
    pub fn genesis(
        relay_base: &str,
        initial: Psbt,
        credentials: Box<dyn CredentialStore>,
        sink: Box<dyn ReceiptSink>,
        clock: Arc<dyn WallClock>,
    ) -> Result<(RoomLink, Self, WireMessage), SessionError> {
        Self::genesis_with(relay_base, initial, credentials, sink, clock, RoomMaterial::generate())
    }

    /// [`genesis`](Self::genesis) with caller-chosen identifiers and secrets.
    pub fn genesis_with(
        relay_base: &str,
        initial: Psbt,
        mut credentials: Box<dyn CredentialStore>,
        sink: Box<dyn ReceiptSink>,
        clock: Arc<dyn WallClock>,
        material: RoomMaterial,
    ) -> Result<(RoomLink, Self, WireMessage), SessionError> {
        progress(&initial)?;
        let RoomMaterial { room_id, key, admin_secret } = material;
        let token = encrypt(&key, &room_id, Purpose::Token, admin_secret.as_bytes())?;
        credentials.put(room_id, &token).map_err(|e| SessionError::Credentials(e.to_string()))?;
        let link = RoomLink::new(relay_base, room_id, key.clone());
        let core = Core {
            room_id,
            key,
            base: link.base().to_owned(),
            session_id: None,
            current: Some(initial),
            log: EventLog::new(),
            participants: Vec::new(),
            anomalies: 0,
            conflicts: 0,
            quorum: false,
            txid: None,
            clock,
        };
        let session = Self {
            core,
            admin_secret,
            credentials,
            sink,
            emitted: None,
            sink_error: None,
            state: CoordinatorState::Created,
            locked: false,
        };
        let frame = WireMessage::CreateRoom { room_id, encrypted_admin_token: token };
        Ok((link, session, frame))
    }

    pub fn state(&self) -> CoordinatorState {
        self.state
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn current_psbt(&self) -> &Psbt {
        self.core.current.as_ref().expect("coordinator always holds a psbt")
    }

    pub fn progress(&self) -> Option<SignatureProgress> {
        self.core.progress()
    }

    pub fn events(&self) -> &EventLog {
        &self.core.log
    }

    pub fn anomalies(&self) -> u64 {
        self.core.anomalies
    }

    pub fn conflicts(&self) -> u64 {
        self.core.conflicts
    }

    pub fn participants(&self) -> &[SessionId] {
        &self.core.participants
    }

    pub fn credentials(&self) -> &dyn CredentialStore {
        self.credentials.as_ref()
    }

    pub fn credentials_mut(&mut self) -> &mut dyn CredentialStore {
        self.credentials.as_mut()
    }

    /// True when the stored token opens to this session's admin secret under the room key.
    pub fn token_matches_secret(&self) -> bool {
        self.credentials
            .get(self.core.room_id)
            .and_then(|t| decrypt(&self.core.key, &self.core.room_id, Purpose::Token, &t).ok())
            .is_some_and(|plain| plain == self.admin_secret.as_bytes())
    }

    /// The Admin frame, carrying the stored token verbatim.
    pub fn admin_frame(&self, action: AdminAction) -> Result<WireMessage, SessionError> {
        if self.state == CoordinatorState::Closed {
            return Err(SessionError::Closed);
        }
        let presented_token = self.credentials.get(self.core.room_id).ok_or(SessionError::TokenMissing)?;
        Ok(WireMessage::Admin { action, presented_token })
    }

    pub fn submit(&mut self, psbt: &Psbt) -> Result<(WireMessage, Vec<Update>), SessionError> {
        if self.state == CoordinatorState::Closed {
            return Err(SessionError::Closed);
        }
        let (frame, updates) = self.core.submit(psbt)?;
        self.after_quorum_check();
        Ok((frame, updates))
    }

    fn after_quorum_check(&mut self) {
        if self.core.quorum && matches!(self.state, CoordinatorState::Connected | CoordinatorState::Locked) {
            self.state = CoordinatorState::Quorum;
        }
    }

    /// Finalizes the merged PSBT. Refuses before quorum.
    pub fn finalize(&self) -> Result<FinalTx, SessionError> {
        if self.state == CoordinatorState::Closed {
            return Err(SessionError::Closed);
        }
        let (_, tx) = finalize(self.current_psbt())?;
        Ok(tx)
    }

    /// Records an endpoint's answer to a broadcast of the finalized transaction.
    pub fn record_broadcast(&mut self, returned: &str) -> Result<Txid, SessionError> {
        let expected = self.finalize()?.txid();
        if returned.trim() != expected.to_string() {
            return Err(SessionError::TxidMismatch { expected: expected.to_string(), got: returned.trim().to_owned() });
        }
        self.core.txid = Some(expected);
        let mut d = BTreeMap::new();
        d.insert("txid".into(), Value::from(expected.to_string()));
        self.core.event(EventKind::TxBroadcast, None, d);
        self.state = CoordinatorState::Broadcast;
        Ok(expected)
    }

    pub fn txid(&self) -> Option<Txid> {
        self.core.txid
    }

    pub fn receipt(&self) -> AuditReceipt {
        self.core.receipt()
    }

    /// Writes the receipt to the session's sink, and only then yields the Close frame.
    pub fn forced_exit(&mut self) -> Result<(AuditReceipt, WireMessage), SessionError> {
        if self.state == CoordinatorState::Closed {
            return Err(SessionError::Closed);
        }
        let close = self.admin_frame(AdminAction::Close)?;
        let receipt = self.emit_receipt("coordinator")?;
        Ok((receipt, close))
    }

    /// Appends room_closed, writes the receipt and enters `closed`. On a
    /// failed write the entry is withdrawn and the state is left alone.
    fn emit_receipt(&mut self, by: &str) -> Result<AuditReceipt, SessionError> {
        let mut d = BTreeMap::new();
        d.insert("by".into(), Value::from(by));
        self.core.event(EventKind::RoomClosed, None, d);
        let receipt = self.core.receipt();
        if let Err(e) = self.sink.write(&receipt) {
            self.core.log.pop();
            let e = SessionError::SinkWrite(e.to_string());
            self.sink_error = Some(e.to_string());
            return Err(e);
        }
        self.state = CoordinatorState::Closed;
        self.credentials.remove(self.core.room_id);
        self.emitted = Some(receipt.clone());
        Ok(receipt)
    }

    /// The receipt written when the session closed.
    pub fn emitted_receipt(&self) -> Option<&AuditReceipt> {
        self.emitted.as_ref()
    }

    /// Why the last receipt write failed, if it did.
    pub fn sink_error(&self) -> Option<&str> {
        self.sink_error.as_deref()
    }

    pub fn diagnostic(&self) -> String {
        self.core.diagnostic("coordinator", &format!("{:?}", self.state).to_lowercase())
    }
}

impl Participant for CoordinatorSession {
    fn room_id(&self) -> RoomId {
        self.core.room_id
    }

    fn session_id(&self) -> Option<SessionId> {
        self.core.session_id
    }

    fn on_message(&mut self, msg: WireMessage) -> Step {
        let mut step = Step::default();
        match msg {
            WireMessage::Joined { session_id, member_count, locked, ttl_seconds } if self.core.session_id.is_none() => {
                self.core.session_id = Some(session_id);
                self.core.saw(session_id);
                self.state = CoordinatorState::Connected;
                self.core.event(EventKind::RoomCreated, Some(session_id), BTreeMap::new());
                step.updates.push(Update::Joined { session_id, member_count, locked, ttl_seconds });
                self.core.check_quorum(&mut step.updates);
                self.after_quorum_check();
                // Publish the starting PSBT so the room's state is on the wire from the start.
                if let Ok(frame) = self.core.seal_current() {
                    let d = progress_detail(&self.core.fingerprint(), self.core.progress().as_ref());
                    self.core.event(EventKind::PsbtSubmitted, Some(session_id), d);
                    step.send.push(frame);
                }
            }
            WireMessage::Notify { event: NotifyEvent::PeerJoined, session_id: Some(peer) } => {
                self.core.saw(peer);
                self.core.event(EventKind::PeerJoined, Some(peer), BTreeMap::new());
                step.updates.push(Update::PeerJoined(peer));
                // The relay keeps nothing, so a newcomer learns the state from us.
                if let Ok(frame) = self.core.seal_current() {
                    let mut d = progress_detail(&self.core.fingerprint(), self.core.progress().as_ref());
                    d.insert("reason".into(), Value::from("sync"));
                    self.core.event(EventKind::PsbtSubmitted, self.core.session_id, d);
                    step.send.push(frame);
                }
            }
            WireMessage::Notify { event: NotifyEvent::PeerLeft, session_id } => {
                self.core.event(EventKind::PeerLeft, session_id, BTreeMap::new());
                if let Some(s) = session_id {
                    step.updates.push(Update::PeerLeft(s));
                }
            }
            WireMessage::Notify { event: NotifyEvent::Locked, .. } => {
                self.locked = true;
                if self.state == CoordinatorState::Connected {
                    self.state = CoordinatorState::Locked;
                }
                self.core.event(EventKind::Locked, None, BTreeMap::new());
                step.updates.push(Update::Locked);
            }
            WireMessage::Notify { event: NotifyEvent::Closing, .. } => {
                // Expiry or a close from another token holder. The room is
                // gone either way, so a failed write leaves the session
                // closed with the error recorded.
                if self.state != CoordinatorState::Closed && self.emit_receipt("relay").is_err() {
                    self.state = CoordinatorState::Closed;
                    self.credentials.remove(self.core.room_id);
                }
                step.updates.push(Update::Closing);
            }
            WireMessage::Deliver { sender, payload } => {
                step.updates = self.core.on_deliver(sender, &payload);
                self.after_quorum_check();
            }
            WireMessage::Error { code, detail } => step.updates.push(Update::Rejected { code, detail }),
            _ => {}
        }
        step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuestState {
    Joining,
    Joined,
    Contributed,
    Closed,
}

pub struct GuestSession {
    core: Core,
    state: GuestState,
    locked: bool,
}

impl GuestSession {
    /// Takes the key out of the link. Returns the Join frame.
    pub fn join(link: &RoomLink, clock: Arc<dyn WallClock>) -> (Self, WireMessage) {
        let core = Core {
            room_id: link.room_id(),
            key: link.key().clone(),
            base: link.base().to_owned(),
            session_id: None,
            current: None,
            log: EventLog::new(),
            participants: Vec::new(),
            anomalies: 0,
            conflicts: 0,
            quorum: false,
            txid: None,
            clock,
        };
        (Self { core, state: GuestState::Joining, locked: false }, WireMessage::Join { room_id: link.room_id() })
    }

    pub fn state(&self) -> GuestState {
        self.state
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn current_psbt(&self) -> Option<&Psbt> {
        self.core.current.as_ref()
    }

    pub fn progress(&self) -> Option<SignatureProgress> {
        self.core.progress()
    }

    pub fn events(&self) -> &EventLog {
        &self.core.log
    }

    pub fn anomalies(&self) -> u64 {
        self.core.anomalies
    }

    pub fn conflicts(&self) -> u64 {
        self.core.conflicts
    }

    pub fn submit(&mut self, psbt: &Psbt) -> Result<(WireMessage, Vec<Update>), SessionError> {
        if self.state == GuestState::Closed {
            return Err(SessionError::Closed);
        }
        let out = self.core.submit(psbt)?;
        self.state = GuestState::Contributed;
        Ok(out)
    }

    pub fn receipt(&self) -> AuditReceipt {
        self.core.receipt()
    }

    pub fn diagnostic(&self) -> String {
        self.core.diagnostic("guest", &format!("{:?}", self.state).to_lowercase())
    }
}

impl Participant for GuestSession {
    fn room_id(&self) -> RoomId {
        self.core.room_id
    }

    fn session_id(&self) -> Option<SessionId> {
        self.core.session_id
    }

    fn on_message(&mut self, msg: WireMessage) -> Step {
        let mut step = Step::default();
        match msg {
            WireMessage::Joined { session_id, member_count, locked, ttl_seconds } if self.core.session_id.is_none() => {
                self.core.session_id = Some(session_id);
                self.core.saw(session_id);
                self.state = GuestState::Joined;
                self.locked = locked;
                self.core.event(EventKind::PeerJoined, Some(session_id), BTreeMap::new());
                step.updates.push(Update::Joined { session_id, member_count, locked, ttl_seconds });
            }
            WireMessage::Notify { event: NotifyEvent::PeerJoined, session_id: Some(peer) } => {
                self.core.saw(peer);
                self.core.event(EventKind::PeerJoined, Some(peer), BTreeMap::new());
                step.updates.push(Update::PeerJoined(peer));
            }
            WireMessage::Notify { event: NotifyEvent::PeerLeft, session_id } => {
                self.core.event(EventKind::PeerLeft, session_id, BTreeMap::new());
                if let Some(s) = session_id {
                    step.updates.push(Update::PeerLeft(s));
                }
            }
            WireMessage::Notify { event: NotifyEvent::Locked, .. } => {
                self.locked = true;
                self.core.event(EventKind::Locked, None, BTreeMap::new());
                step.updates.push(Update::Locked);
            }
            WireMessage::Notify { event: NotifyEvent::Closing, .. } => {
                if self.state != GuestState::Closed {
                    self.core.event(EventKind::RoomClosed, None, BTreeMap::new());
                    self.state = GuestState::Closed;
                }
                step.updates.push(Update::Closing);
            }
            WireMessage::Deliver { sender, payload } => step.updates = self.core.on_deliver(sender, &payload),
            WireMessage::Error { code, detail } => step.updates.push(Update::Rejected { code, detail }),
            _ => {}
        }
        step
    }
}
