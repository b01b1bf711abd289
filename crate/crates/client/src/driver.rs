//! Sessions wired to a live relay connection.

use std::sync::Arc;
use std::time::Duration;

use blindroom_core::{AdminAction, RoomLink, WireMessage};
use blindroom_psbt::{Psbt, Txid};
use tokio::time::{timeout_at, Instant};

use crate::broadcast::post_tx;
use crate::clock::WallClock;
use crate::credentials::CredentialStore;
use crate::error::SessionError;
use crate::receipt::{AuditReceipt, ReceiptSink};
use crate::session::{CoordinatorSession, CoordinatorState, GuestSession, Participant, RoomMaterial, Update};
use crate::transport::{FrameObserver, WsTransport};

pub const DEFAULT_WAIT: Duration = Duration::from_secs(30);

pub struct Live<S> {
    session: S,
    transport: WsTransport,
    socket_closed: bool,
}

pub type Coordinator = Live<CoordinatorSession>;
pub type Guest = Live<GuestSession>;

impl<S: Participant> Live<S> {
    pub fn session(&self) -> &S {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut S {
        &mut self.session
    }

    pub fn transport(&self) -> &WsTransport {
        &self.transport
    }

    pub fn socket_closed(&self) -> bool {
        self.socket_closed
    }

    pub async fn send(&mut self, msg: &WireMessage) -> Result<(), SessionError> {
        self.transport.send(msg).await
    }

    /// The next frame from the relay, `None` once it hangs up. Safe to use in `select!`.
    pub async fn next_message(&mut self) -> Result<Option<WireMessage>, SessionError> {
        let msg = self.transport.recv().await?;
        if msg.is_none() {
            self.socket_closed = true;
        }
        Ok(msg)
    }

    /// Feeds a frame from [`next_message`](Self::next_message) to the session and sends what it produces.
    pub async fn apply(&mut self, msg: WireMessage) -> Result<Vec<Update>, SessionError> {
        self.dispatch(msg).await
    }

    async fn dispatch(&mut self, msg: WireMessage) -> Result<Vec<Update>, SessionError> {
        let step = self.session.on_message(msg);
        for frame in &step.send {
            self.transport.send(frame).await?;
        }
        Ok(step.updates)
    }

    /// Handles frames until one yields an update matching `done`. A relay
    /// error ends the wait.
    pub async fn wait_for(
        &mut self,
        what: &'static str,
        limit: Duration,
        mut done: impl FnMut(&S, &Update) -> bool,
    ) -> Result<Vec<Update>, SessionError> {
        let deadline = Instant::now() + limit;
        let mut seen = Vec::new();
        loop {
            let msg = match timeout_at(deadline, self.transport.recv()).await {
                Err(_) => return Err(SessionError::Timeout(what)),
                Ok(r) => r?,
            };
            let Some(msg) = msg else {
                self.socket_closed = true;
                return Err(SessionError::ConnectionLost);
            };
            let updates = self.dispatch(msg).await?;
            let mut finished = false;
            for u in updates {
                if let Update::Rejected { code, detail } = &u {
                    return Err(SessionError::Relay { code: *code, detail: detail.clone() });
                }
                finished |= done(&self.session, &u);
                seen.push(u);
            }
            if finished {
                return Ok(seen);
            }
        }
    }

    /// Handles frames until none arrives for `quiet`, or the relay hangs up.
    pub async fn pump(&mut self, quiet: Duration) -> Result<Vec<Update>, SessionError> {
        let mut seen = Vec::new();
        while !self.socket_closed {
            match tokio::time::timeout(quiet, self.transport.recv()).await {
                Err(_) => break,
                Ok(Ok(Some(msg))) => seen.extend(self.dispatch(msg).await?),
                Ok(Ok(None)) => self.socket_closed = true,
                Ok(Err(e)) => return Err(e),
            }
        }
        Ok(seen)
    }

    pub async fn disconnect(mut self) {
        self.transport.close().await;
    }
}

impl Live<CoordinatorSession> {
    /// Generates the room locally, stores the admin token, and creates the room on the relay.
    pub async fn create(
        relay_base: &str,
        initial: Psbt,
        credentials: Box<dyn CredentialStore>,
        sink: Box<dyn ReceiptSink>,
        clock: Arc<dyn WallClock>,
        observer: Option<Arc<dyn FrameObserver>>,
    ) -> Result<(RoomLink, Self), SessionError> {
        Self::create_with(relay_base, initial, credentials, sink, clock, observer, RoomMaterial::generate()).await
    }

    /// [`create`](Self::create) with caller-chosen room material.
    pub async fn create_with(
        relay_base: &str,
        initial: Psbt,
        credentials: Box<dyn CredentialStore>,
        sink: Box<dyn ReceiptSink>,
        clock: Arc<dyn WallClock>,
        observer: Option<Arc<dyn FrameObserver>>,
        material: RoomMaterial,
    ) -> Result<(RoomLink, Self), SessionError> {
        let (link, session, create) =
            CoordinatorSession::genesis_with(relay_base, initial, credentials, sink, clock, material)?;
        let transport = WsTransport::connect(relay_base, observer).await?;
        let mut live = Self { session, transport, socket_closed: false };
        live.transport.send(&create).await?;
        live.wait_for("room creation", DEFAULT_WAIT, |_, u| matches!(u, Update::Joined { .. })).await?;
        Ok((link, live))
    }

    pub async fn lock(&mut self, limit: Duration) -> Result<(), SessionError> {
        if self.session.is_locked() {
            return Ok(());
        }
        let frame = self.session.admin_frame(AdminAction::Lock)?;
        self.transport.send(&frame).await?;
        self.wait_for("lock", limit, |_, u| *u == Update::Locked).await?;
        Ok(())
    }

    pub async fn submit(&mut self, psbt: &Psbt) -> Result<Vec<Update>, SessionError> {
        let (frame, updates) = self.session.submit(psbt)?;
        self.transport.send(&frame).await?;
        Ok(updates)
    }

    pub async fn wait_for_quorum(&mut self, limit: Duration) -> Result<(), SessionError> {
        if matches!(self.session.state(), CoordinatorState::Quorum | CoordinatorState::Broadcast) {
            return Ok(());
        }
        self.wait_for("quorum", limit, |_, u| *u == Update::QuorumReached).await?;
        Ok(())
    }

    /// Finalizes, posts to the endpoint and checks the txid it reports.
    pub async fn broadcast(&mut self, endpoint: &str) -> Result<Txid, SessionError> {
        let tx = self.session.finalize()?;
        let returned = post_tx(endpoint, &tx.to_hex()).await?;
        self.session.record_broadcast(&returned)
    }

    /// Writes the receipt, then asks the relay to wipe the room.
    pub async fn close(&mut self, limit: Duration) -> Result<AuditReceipt, SessionError> {
        let (receipt, frame) = self.session.forced_exit()?;
        self.transport.send(&frame).await?;
        match self.wait_for("room close", limit, |_, u| *u == Update::Closing).await {
            Ok(_) | Err(SessionError::ConnectionLost) => {}
            Err(e) => return Err(e),
        }
        self.transport.close().await;
        Ok(receipt)
    }
}

impl Live<GuestSession> {
    pub async fn join(
        link: &RoomLink,
        clock: Arc<dyn WallClock>,
        observer: Option<Arc<dyn FrameObserver>>,
    ) -> Result<Self, SessionError> {
        let (session, join) = GuestSession::join(link, clock);
        let transport = WsTransport::connect(link.base(), observer).await?;
        let mut live = Self { session, transport, socket_closed: false };
        live.transport.send(&join).await?;
        live.wait_for("join", DEFAULT_WAIT, |_, u| matches!(u, Update::Joined { .. })).await?;
        Ok(live)
    }

    pub async fn wait_for_psbt(&mut self, limit: Duration) -> Result<&Psbt, SessionError> {
        if self.session.current_psbt().is_none() {
            self.wait_for("psbt", limit, |s, _| s.current_psbt().is_some()).await?;
        }
        self.session.current_psbt().ok_or(SessionError::NoPsbt)
    }

    pub async fn submit(&mut self, psbt: &Psbt) -> Result<Vec<Update>, SessionError> {
        let (frame, updates) = self.session.submit(psbt)?;
        self.transport.send(&frame).await?;
        Ok(updates)
    }
}
