//! A relay on loopback with an injected clock, a confined working
//! directory, a stub broadcast endpoint and one transcript collector.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use blindroom_core::RoomId;
use blindroom_relay::{ManualClock, MemoryLog, Relay, RelayConfig, RunningRelay};
use tokio::net::TcpListener;

use crate::sabotage::{self, KeyRegistry, Sabotage};
use crate::storage::{storage_probe, DirSnapshot, StorageDelta};
use crate::stub::{StubEndpoint, StubMode};
use crate::transcript::{Collector, Transcript};

/// The static client bundle the relay serves from its working directory.
pub const STATIC_BUNDLE: [(&str, &str); 3] = [
    ("index.html", "<!doctype html><html><head><link rel=\"stylesheet\" href=\"/app.css\"></head><body><script src=\"/app.js\"></script></body></html>\n"),
    ("app.js", "document.body.dataset.ready = \"1\";\n"),
    ("app.css", "body { font-family: sans-serif; }\n"),
];

pub struct World {
    pub workdir: PathBuf,
    pub clock: Arc<ManualClock>,
    pub log: MemoryLog,
    pub collector: Collector,
    pub stub: StubEndpoint,
    pub keys: KeyRegistry,
    sabotage: Option<Sabotage>,
    running: Option<RunningRelay>,
    baseline: DirSnapshot,
}

impl World {
    pub async fn start(workdir: &Path, sabotage: Option<Sabotage>) -> io::Result<Self> {
        let static_dir = workdir.join("static");
        fs::create_dir_all(&static_dir)?;
        for (name, body) in STATIC_BUNDLE {
            fs::write(static_dir.join(name), body)?;
        }
        let mut world = Self {
            workdir: workdir.to_path_buf(),
            clock: Arc::new(ManualClock::new()),
            log: MemoryLog::new(),
            collector: Collector::new(),
            stub: StubEndpoint::start(StubMode::golden()).await?,
            keys: KeyRegistry::new(),
            sabotage,
            running: None,
            baseline: DirSnapshot::take(workdir)?,
        };
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        world.running = Some(RunningRelay::start(world.build_relay(), listener).await?);
        Ok(world)
    }

    fn config(&self) -> RelayConfig {
        RelayConfig {
            listen_address: ([127, 0, 0, 1], 0).into(),
            static_asset_dir: Some(self.workdir.join("static")),
            ..RelayConfig::default()
        }
    }

    fn build_relay(&self) -> Relay {
        let log = Arc::new(self.log.clone());
        match self.sabotage {
            None => Relay::new(self.config(), self.clock.clone(), log),
            Some(kind) => {
                let tap = sabotage::tap(kind, self.keys.clone(), self.workdir.join("spill"));
                Relay::with_tap(self.config(), self.clock.clone(), log, tap)
            }
        }
    }

    fn running(&self) -> &RunningRelay {
        self.running.as_ref().expect("relay is running")
    }

    pub fn relay(&self) -> &Relay {
        &self.running().relay
    }

    pub fn base_url(&self) -> String {
        self.running().http_url()
    }

    pub fn ttl(&self) -> Duration {
        self.relay().config().room_ttl
    }

    /// Warps past the idle TTL and sweeps.
    pub fn expire_idle(&self) -> Vec<RoomId> {
        self.clock.advance(self.ttl() + Duration::from_secs(1));
        self.relay().sweep()
    }

    pub fn checkpoint(&self, label: impl Into<String>) {
        self.collector.checkpoint(self.relay(), label);
    }

    /// Bytes the run left in the working directory.
    pub fn storage_delta(&self) -> io::Result<StorageDelta> {
        Ok(storage_probe(&self.baseline, &DirSnapshot::take(&self.workdir)?))
    }

    pub fn transcript(&self) -> Transcript {
        let mut t = self.collector.snapshot();
        t.relay_log = self.log.lines();
        t
    }

    /// Stops the relay process and starts a fresh one on the same address.
    pub async fn restart(&mut self) -> io::Result<()> {
        let old = self.running.take().expect("relay is running");
        let addr = old.addr;
        old.shutdown().await?;
        let listener = TcpListener::bind(addr).await?;
        self.running = Some(RunningRelay::start(self.build_relay(), listener).await?);
        Ok(())
    }

    pub async fn shutdown(mut self) -> io::Result<()> {
        match self.running.take() {
            Some(r) => r.shutdown().await,
            None => Ok(()),
        }
    }
}
