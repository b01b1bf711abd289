//! A loopback stand-in for an Esplora broadcast API.

use std::collections::HashMap;
use std::io;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use blindroom_psbt::Transaction;
use tokio::sync::oneshot;

use crate::fixtures;

#[derive(Debug, Clone)]
pub enum StubMode {
    /// Accepts the listed raw transactions, or any other witness variant of
    /// the same txids, and answers with the txid.
    Known(HashMap<String, String>),
    /// Always answers with this status and body.
    Fixed { status: u16, body: String },
}

impl StubMode {
    /// Every golden transaction of every fixture set.
    pub fn golden() -> Self {
        let mut known = HashMap::new();
        for set in fixtures::all() {
            for hex in set.finals() {
                known.insert(hex.to_owned(), set.txid().to_owned());
            }
        }
        StubMode::Known(known)
    }
}

#[derive(Clone)]
struct Shared {
    mode: StubMode,
    received: Arc<Mutex<Vec<String>>>,
}

pub struct StubEndpoint {
    /// Base URL; transactions go to `{url}/tx`.
    pub url: String,
    received: Arc<Mutex<Vec<String>>>,
    stop: Option<oneshot::Sender<()>>,
}

impl StubEndpoint {
    pub async fn start(mode: StubMode) -> io::Result<Self> {
        let received = Arc::new(Mutex::new(Vec::new()));
        let app = Router::new()
            .route("/api/tx", post(submit))
            .with_state(Shared { mode, received: received.clone() });
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = stopped.await;
                })
                .await;
        });
        Ok(Self { url: format!("http://{addr}/api"), received, stop: Some(stop) })
    }

    /// Raw transaction bodies in arrival order.
    pub fn received(&self) -> Vec<String> {
        self.received.lock().unwrap().clone()
    }
}

impl Drop for StubEndpoint {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

async fn submit(State(shared): State<Shared>, body: String) -> (StatusCode, String) {
    let body = body.trim().to_owned();
    shared.received.lock().unwrap().push(body.clone());
    match &shared.mode {
        StubMode::Known(known) => {
            let txid = known.get(&body).cloned().or_else(|| {
                let tx = Transaction::decode(&hex::decode(&body).ok()?).ok()?.txid().to_string();
                known.values().any(|t| *t == tx).then_some(tx)
            });
            match txid {
                Some(txid) => (StatusCode::OK, txid),
                None => (StatusCode::BAD_REQUEST, "sendrawtransaction RPC error: bad-txns-inputs-missingorspent".into()),
            }
        }
        StubMode::Fixed { status, body } => (StatusCode::from_u16(*status).unwrap_or(StatusCode::BAD_REQUEST), body.clone()),
    }
}
