//! Drives scripted ceremonies against a [`World`], one event-driven step at
//! a time, so every client sees the same frame sequence for the same script.

use std::sync::Arc;
use std::time::Duration;

use blindroom_client::{
    Coordinator, Guest, GuestSession, MemorySink, MemoryStore, RoomMaterial, SessionError,
    SteppingClock, Update, WallClock, WsTransport,
};
use blindroom_core::{ErrorCode, RoomId, RoomLink, WireMessage};
use blindroom_psbt::Psbt;
use chrono::{TimeZone, Utc};
use futures::future::join_all;
use serde::Serialize;

use crate::audit::Secrets;
use crate::fixtures::{self, FixtureSet};
use crate::scenario::{Ending, Member, Scenario, ScenarioError, Step};
use crate::traffic::load_app;
use crate::transcript::UpgradeEntry;
use crate::world::World;

pub const WAIT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("ceremony {ceremony}: {source}")]
    Session { ceremony: u64, source: SessionError },
    #[error("ceremony {ceremony}: static fetch failed: {detail}")]
    Http { ceremony: u64, detail: String },
    #[error("ceremony {ceremony}: {detail}")]
    Unexpected { ceremony: u64, detail: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct CeremonyOutcome {
    pub index: u64,
    pub scenario: Scenario,
    #[serde(skip)]
    pub room_id: RoomId,
    pub txid: Option<String>,
    pub final_hex: Option<String>,
    /// Canonical JSON of the receipt the coordinator emitted.
    pub receipt: Option<String>,
    pub fingerprint: String,
    /// Every member still present ended on the coordinator's fingerprint.
    pub converged: bool,
    pub rejected_join: Option<ErrorCode>,
    pub anomalies: u64,
    pub expired: bool,
    #[serde(skip)]
    pub secrets: Secrets,
}

fn delivered<S>(_: &S, u: &Update) -> bool {
    matches!(u, Update::Progress(_) | Update::Anomaly | Update::Conflict(_))
}

fn session_clock() -> Arc<dyn WallClock> {
    Arc::new(SteppingClock::new(Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(), chrono::Duration::seconds(1)))
}

/// A room whose schedule has run and whose ending is pending.
pub struct OpenRoom {
    index: u64,
    scenario: Scenario,
    fixture: &'static FixtureSet,
    link: RoomLink,
    coordinator: Coordinator,
    guests: Vec<Option<Guest>>,
    sink: MemorySink,
    plaintexts: Vec<Vec<u8>>,
    rejected_join: Option<ErrorCode>,
}

impl OpenRoom {
    fn session_err(&self, source: SessionError) -> HarnessError {
        HarnessError::Session { ceremony: self.index, source }
    }

    fn unexpected(&self, detail: impl Into<String>) -> HarnessError {
        HarnessError::Unexpected { ceremony: self.index, detail: detail.into() }
    }

    fn keep_plaintext(&mut self, bytes: Vec<u8>) {
        if !self.plaintexts.contains(&bytes) {
            self.plaintexts.push(bytes);
        }
    }

    async fn visit(&self, world: &World, page: &str) -> Result<(), HarnessError> {
        let visitor = world.collector.visitor();
        load_app(&world.base_url(), page, visitor, &world.collector)
            .await
            .map_err(|e| HarnessError::Http { ceremony: self.index, detail: e.to_string() })
    }

    fn record_upgrade(world: &World, transport: &WsTransport) {
        world
            .collector
            .upgrade(UpgradeEntry { visitor: None, cache_control: transport.upgrade_cache_control().map(str::to_owned) });
    }

    async fn each_guest(
        &mut self,
        skip: Option<usize>,
        what: &'static str,
        done: fn(&GuestSession, &Update) -> bool,
    ) -> Result<(), HarnessError> {
        for (g, slot) in self.guests.iter_mut().enumerate() {
            if Some(g) == skip {
                continue;
            }
            if let Some(guest) = slot {
                if let Err(e) = guest.wait_for(what, WAIT, done).await {
                    return Err(HarnessError::Session { ceremony: self.index, source: e });
                }
            }
        }
        Ok(())
    }

    async fn step(&mut self, world: &World, step: Step) -> Result<(), HarnessError> {
        match step {
            Step::Join { guest } => {
                self.visit(world, &format!("/room/{}", self.link.room_id())).await?;
                let observer = world.collector.observer(self.index, format!("guest{guest}"));
                let joined = Guest::join(&self.link, session_clock(), Some(observer)).await.map_err(|e| self.session_err(e))?;
                Self::record_upgrade(world, joined.transport());
                self.coordinator
                    .wait_for("peer joined", WAIT, |_, u| matches!(u, Update::PeerJoined(_)))
                    .await
                    .map_err(|e| self.session_err(e))?;
                // Everyone already inside, and the newcomer, get the coordinator's resync.
                self.guests[guest] = Some(joined);
                self.each_guest(None, "resync", delivered).await?;
            }
            Step::Upload { by, signer } => {
                let psbt = self.fixture.signed(signer);
                self.keep_plaintext(psbt.serialize());
                match by {
                    Member::Coordinator => {
                        self.coordinator.submit(&psbt).await.map_err(|e| self.session_err(e))?;
                        self.each_guest(None, "relayed psbt", delivered).await?;
                    }
                    Member::Guest(g) => {
                        let Some(guest) = self.guests[g].as_mut() else {
                            return Err(self.unexpected(format!("guest{g} is not in the room")));
                        };
                        if let Err(e) = guest.submit(&psbt).await {
                            return Err(self.session_err(e));
                        }
                        self.coordinator.wait_for("relayed psbt", WAIT, delivered).await.map_err(|e| self.session_err(e))?;
                        self.each_guest(Some(g), "relayed psbt", delivered).await?;
                    }
                }
            }
            Step::Lock => {
                self.coordinator.lock(WAIT).await.map_err(|e| self.session_err(e))?;
                self.each_guest(None, "lock", |_, u| *u == Update::Locked).await?;
            }
            Step::JoinRejected => {
                self.visit(world, &format!("/room/{}", self.link.room_id())).await?;
                let observer = world.collector.observer(self.index, "latecomer");
                let (_, join) = GuestSession::join(&self.link, session_clock());
                let mut t = WsTransport::connect(self.link.base(), Some(observer)).await.map_err(|e| self.session_err(e))?;
                Self::record_upgrade(world, &t);
                t.send(&join).await.map_err(|e| self.session_err(e))?;
                let reply = tokio::time::timeout(WAIT, t.recv()).await;
                t.close().await;
                match reply {
                    Ok(Ok(Some(WireMessage::Error { code, .. }))) => self.rejected_join = Some(code),
                    other => return Err(self.unexpected(format!("latecomer was not turned away: {other:?}"))),
                }
            }
            Step::Leave { guest } => {
                let Some(leaving) = self.guests[guest].take() else {
                    return Err(self.unexpected(format!("guest{guest} is not in the room")));
                };
                leaving.disconnect().await;
                self.coordinator
                    .wait_for("peer left", WAIT, |_, u| matches!(u, Update::PeerLeft(_)))
                    .await
                    .map_err(|e| self.session_err(e))?;
                self.each_guest(None, "peer left", |_, u| matches!(u, Update::PeerLeft(_))).await?;
            }
        }
        Ok(())
    }

    /// Creates the room and runs the schedule. The ending is left to the caller.
    pub async fn open(world: &World, index: u64, scenario: Scenario) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let fixture = fixtures::by_name(&scenario.fixture).expect("validated");
        let unsigned = fixture.unsigned();
        let material = RoomMaterial::generate();
        world.keys.register(material.room_id, material.key.clone());

        let visitor = world.collector.visitor();
        load_app(&world.base_url(), "/", visitor, &world.collector)
            .await
            .map_err(|e| HarnessError::Http { ceremony: index, detail: e.to_string() })?;
        let sink = MemorySink::new();
        let (link, coordinator) = Coordinator::create_with(
            &world.base_url(),
            unsigned.clone(),
            Box::new(MemoryStore::new()),
            Box::new(sink.clone()),
            session_clock(),
            Some(world.collector.observer(index, "coordinator")),
            material,
        )
        .await
        .map_err(|source| HarnessError::Session { ceremony: index, source })?;
        Self::record_upgrade(world, coordinator.transport());

        let mut room = Self {
            index,
            guests: (0..scenario.n_guests).map(|_| None).collect(),
            scenario,
            fixture,
            link,
            coordinator,
            sink,
            plaintexts: Vec::new(),
            rejected_join: None,
        };
        room.keep_plaintext(unsigned.serialize());
        let schedule = room.scenario.schedule.clone();
        for step in schedule {
            room.step(world, step).await?;
        }
        world.checkpoint(format!("ceremony {index} scheduled"));
        Ok(room)
    }

    pub fn link(&self) -> &RoomLink {
        &self.link
    }

    pub fn ending(&self) -> Ending {
        self.scenario.ending
    }

    /// Broadcasts through the stub endpoint, then closes the room.
    pub async fn close(mut self, world: &World) -> Result<CeremonyOutcome, HarnessError> {
        self.coordinator.wait_for_quorum(WAIT).await.map_err(|e| self.session_err(e))?;
        let txid = self.coordinator.broadcast(&world.stub.url).await.map_err(|e| self.session_err(e))?;
        if txid.to_string() != self.fixture.txid() {
            return Err(self.unexpected(format!("txid {txid} is not the fixture's {}", self.fixture.txid())));
        }
        let tx = self.coordinator.session().finalize().map_err(|e| self.session_err(e))?;
        self.coordinator.close(WAIT).await.map_err(|e| self.session_err(e))?;
        self.each_guest(None, "closing", |_, u| *u == Update::Closing).await?;
        Ok(self.into_outcome(Some(tx.bytes().to_vec())).await)
    }

    /// Waits for the relay's closing notice after an expiry sweep.
    pub async fn expired(mut self) -> Result<CeremonyOutcome, HarnessError> {
        self.coordinator.wait_for("expiry", WAIT, |_, u| *u == Update::Closing).await.map_err(|e| self.session_err(e))?;
        self.each_guest(None, "expiry", |_, u| *u == Update::Closing).await?;
        let tx = self.coordinator.session().finalize().ok().map(|tx| tx.bytes().to_vec());
        Ok(self.into_outcome(tx).await)
    }

    /// `final_tx` is the broadcast transaction for a closed room, or for an
    /// expired one the transaction that could have been.
    async fn into_outcome(mut self, final_tx: Option<Vec<u8>>) -> CeremonyOutcome {
        let expired = self.scenario.ending == Ending::Expire;
        let session = self.coordinator.session();
        let current = session.current_psbt().clone();
        let fingerprint = current.fingerprint_hex();
        let txid = session.txid().map(|t| t.to_string());
        let mut anomalies = session.anomalies();
        let mut converged = true;
        let mut guest_states: Vec<Psbt> = Vec::new();
        for guest in self.guests.iter().flatten() {
            anomalies += guest.session().anomalies();
            match guest.session().current_psbt() {
                Some(p) => {
                    converged &= p.fingerprint_hex() == fingerprint;
                    guest_states.push(p.clone());
                }
                None => converged = false,
            }
        }
        self.keep_plaintext(current.serialize());
        for p in guest_states {
            self.keep_plaintext(p.serialize());
        }
        if let Some(tx) = &final_tx {
            self.keep_plaintext(tx.clone());
        }
        for guest in self.guests.into_iter().flatten() {
            guest.disconnect().await;
        }
        let receipt = self.sink.receipts().last().cloned();
        let room_id = self.link.room_id();
        let secrets = Secrets { room_key: *self.link.key().as_bytes(), plaintexts: self.plaintexts };
        self.coordinator.disconnect().await;
        CeremonyOutcome {
            index: self.index,
            scenario: self.scenario,
            room_id,
            txid,
            final_hex: final_tx.filter(|_| !expired).map(hex::encode),
            receipt,
            fingerprint,
            converged,
            rejected_join: self.rejected_join,
            anomalies,
            expired,
            secrets,
        }
    }
}

/// One ceremony start to finish. An expiring ceremony warps the world's clock.
pub async fn run_ceremony(world: &World, index: u64, scenario: Scenario) -> Result<CeremonyOutcome, HarnessError> {
    let room = OpenRoom::open(world, index, scenario).await?;
    match room.ending() {
        Ending::Close => room.close(world).await,
        Ending::Expire => {
            world.expire_idle();
            room.expired().await
        }
    }
}

/// Runs scenarios concurrently. Closing ceremonies finish first; then the
/// clock is warped once so every expiring room in the batch idles out.
pub async fn run_batch(world: &World, first_index: u64, scenarios: Vec<Scenario>) -> Vec<Result<CeremonyOutcome, HarnessError>> {
    let opened = join_all(scenarios.into_iter().enumerate().map(|(i, s)| OpenRoom::open(world, first_index + i as u64, s))).await;
    let mut results: Vec<Option<Result<CeremonyOutcome, HarnessError>>> = Vec::new();
    let mut closing = Vec::new();
    let mut expiring = Vec::new();
    for (slot, r) in opened.into_iter().enumerate() {
        results.push(None);
        match r {
            Err(e) => results[slot] = Some(Err(e)),
            Ok(room) if room.ending() == Ending::Close => closing.push((slot, room)),
            Ok(room) => expiring.push((slot, room)),
        }
    }
    world.checkpoint(format!("batch {first_index} live"));
    let closed = join_all(closing.into_iter().map(|(slot, room)| async move { (slot, room.close(world).await) })).await;
    for (slot, r) in closed {
        results[slot] = Some(r);
    }
    if !expiring.is_empty() {
        world.expire_idle();
        let expired = join_all(expiring.into_iter().map(|(slot, room)| async move { (slot, room.expired().await) })).await;
        for (slot, r) in expired {
            results[slot] = Some(r);
        }
    }
    world.checkpoint(format!("batch {first_index} done"));
    results.into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Generated scenarios for `seeds`, in batches of `batch` concurrent ceremonies.
pub async fn run_seeds(world: &World, seeds: std::ops::Range<u64>, batch: usize) -> Vec<Result<CeremonyOutcome, HarnessError>> {
    let scenarios: Vec<Scenario> = seeds.map(Scenario::random).collect();
    let mut out = Vec::with_capacity(scenarios.len());
    for (n, chunk) in scenarios.chunks(batch.max(1)).enumerate() {
        out.extend(run_batch(world, (n * batch.max(1)) as u64, chunk.to_vec()).await);
    }
    out
}
