#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use blindroom_client::{SteppingClock, WallClock};
use blindroom_psbt::Psbt;
use blindroom_relay::{MemoryLog, Relay, RelayConfig, RunningRelay, SystemClock};
use chrono::{TimeZone, Utc};

pub const WAIT: Duration = Duration::from_secs(5);
pub const QUIET: Duration = Duration::from_millis(150);

fn fixture_dir(set: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../psbt/fixtures").join(set)
}

pub fn fixture(set: &str, name: &str) -> Psbt {
    let text = std::fs::read_to_string(fixture_dir(set).join(format!("{name}.psbt"))).unwrap();
    Psbt::from_base64(text.trim()).unwrap()
}

pub fn golden_hex(set: &str, pair: &str) -> String {
    std::fs::read_to_string(fixture_dir(set).join(format!("final_{pair}.hex"))).unwrap().trim().to_owned()
}

pub fn golden_txid(set: &str) -> String {
    std::fs::read_to_string(fixture_dir(set).join("txid.txt")).unwrap().trim().to_owned()
}

pub fn clock() -> Arc<dyn WallClock> {
    Arc::new(SteppingClock::new(Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(), chrono::Duration::seconds(1)))
}

pub struct TestRelay {
    pub running: RunningRelay,
    pub log: MemoryLog,
}

pub async fn relay() -> TestRelay {
    let log = MemoryLog::new();
    let relay = Relay::new(RelayConfig::default(), Arc::new(SystemClock::new()), Arc::new(log.clone()));
    TestRelay { running: RunningRelay::bind(relay).await.unwrap(), log }
}

/// A loopback stand-in for an Esplora `/tx` endpoint with a fixed reply.
pub struct StubEndpoint {
    pub url: String,
    pub received: Arc<Mutex<Vec<String>>>,
}

pub async fn stub_endpoint(status: u16, reply: &str) -> StubEndpoint {
    let received = Arc::new(Mutex::new(Vec::new()));
    let seen = received.clone();
    let reply = reply.to_owned();
    let app = Router::new().route(
        "/api/tx",
        post(move |body: String| {
            let seen = seen.clone();
            let reply = reply.clone();
            async move {
                seen.lock().unwrap().push(body);
                (StatusCode::from_u16(status).unwrap(), reply)
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    StubEndpoint { url: format!("http://{addr}/api"), received }
}
