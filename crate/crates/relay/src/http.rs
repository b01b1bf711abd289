//! HTTP surface: the static client with long-lived cache headers, the
//! WebSocket endpoint, and metrics. Only static assets are cacheable.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::State;
use axum::http::header::{CACHE_CONTROL, CONTENT_TYPE, ETAG, IF_NONE_MATCH};
use axum::http::{HeaderMap, HeaderValue, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::metrics::Counters;
use crate::relay::{Outbound, Relay};

pub const STATIC_CACHE_CONTROL: &str = "public, max-age=86400";
pub const DYNAMIC_CACHE_CONTROL: &str = "no-store";

pub fn router(relay: Relay) -> Router {
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/metrics", get(metrics_handler))
        .fallback(get(static_handler))
        .with_state(relay)
}

fn no_store(mut resp: Response) -> Response {
    resp.headers_mut().insert(CACHE_CONTROL, HeaderValue::from_static(DYNAMIC_CACHE_CONTROL));
    resp
}

async fn metrics_handler(State(relay): State<Relay>) -> Response {
    no_store(Json(relay.metrics()).into_response())
}

async fn ws_handler(State(relay): State<Relay>, ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>) -> Response {
    let ws = match ws {
        Ok(ws) => ws,
        Err(rejection) => return no_store(rejection.into_response()),
    };
    Counters::bump(&relay.counters().websocket_upgrades, 1);
    let limit = relay.config().max_frame_bytes();
    no_store(ws.max_message_size(limit).max_frame_size(limit).on_upgrade(move |socket| run_socket(socket, relay)))
}

async fn run_socket(socket: WebSocket, relay: Relay) {
    let (mut sink, mut stream) = socket.split();
    let (mut conn, mut outbound) = relay.connect();
    let mut writer = tokio::spawn(async move {
        while let Some(out) = outbound.recv().await {
            match out {
                Outbound::Frame(text) => {
                    if sink.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Outbound::Close => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            }
        }
        let _ = sink.close().await;
    });
    let mut writer_done = false;
    loop {
        tokio::select! {
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => conn.handle_text(text.as_str()),
                Some(Ok(Message::Binary(bytes))) => conn.handle_binary(bytes.len()),
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => {}
                Some(Ok(Message::Close(_)) | Err(_)) | None => break,
            },
            _ = &mut writer => {
                writer_done = true;
                break;
            }
        }
    }
    conn.disconnect();
    // The writer drains whatever was queued before the disconnect, then ends with its queue.
    if !writer_done {
        let _ = writer.await;
    }
}

#[derive(Debug, PartialEq, Eq)]
enum AssetPath {
    File(PathBuf),
    Traversal,
}

fn percent_decode(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = std::str::from_utf8(bytes.get(i + 1..i + 3)?).ok()?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// Maps a request path to a file below the asset root. The client app
/// answers `/` and every `/room/<id>` path.
fn asset_path(path: &str) -> AssetPath {
    if path == "/" || path.strip_prefix("/room/").is_some_and(|rest| !rest.contains('/')) {
        return AssetPath::File(PathBuf::from("index.html"));
    }
    let Some(decoded) = percent_decode(path) else { return AssetPath::Traversal };
    if decoded.contains('\\') || decoded.contains('\0') {
        return AssetPath::Traversal;
    }
    let rel = Path::new(decoded.strip_prefix('/').unwrap_or(&decoded));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) || rel.as_os_str().is_empty() {
        return AssetPath::Traversal;
    }
    AssetPath::File(rel.to_path_buf())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("wasm") => "application/wasm",
        Some("txt") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Strong validator over the asset bytes.
pub fn etag_for(body: &[u8]) -> String {
    format!("\"{}\"", &hex_lower(&Sha256::digest(body))[..32])
}

fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

async fn static_handler(State(relay): State<Relay>, uri: Uri, headers: HeaderMap) -> Response {
    let counters = relay.counters();
    let miss = |status: StatusCode, body: &'static str| {
        Counters::bump(&counters.static_miss, 1);
        no_store((status, body).into_response())
    };
    let Some(root) = relay.config().static_asset_dir.clone() else {
        return miss(StatusCode::NOT_FOUND, "not found");
    };
    let rel = match asset_path(uri.path()) {
        AssetPath::File(rel) => rel,
        AssetPath::Traversal => return miss(StatusCode::BAD_REQUEST, "path rejected"),
    };
    let full = root.join(&rel);
    // Symlinks could still point outside the root.
    let inside = match (tokio::fs::canonicalize(&root).await, tokio::fs::canonicalize(&full).await) {
        (Ok(root), Ok(full)) => full.starts_with(root),
        _ => false,
    };
    let body = match inside {
        true => tokio::fs::read(&full).await.ok(),
        false => None,
    };
    let Some(body) = body else { return miss(StatusCode::NOT_FOUND, "not found") };
    Counters::bump(&counters.static_hit, 1);
    let etag = etag_for(&body);
    let mut resp = if headers.get(IF_NONE_MATCH).and_then(|v| v.to_str().ok()).is_some_and(|v| v.split(',').any(|t| t.trim() == etag)) {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        let mut r = body.into_response();
        r.headers_mut().insert(CONTENT_TYPE, HeaderValue::from_static(content_type(&rel)));
        r
    };
    let h = resp.headers_mut();
    h.insert(CACHE_CONTROL, HeaderValue::from_static(STATIC_CACHE_CONTROL));
    h.insert(ETAG, HeaderValue::from_str(&etag).expect("hex is a valid header"));
    resp
}

/// Serves until `shutdown` resolves, then wipes every room so open sockets close.
pub async fn serve(relay: Relay, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
    let on_stop = relay.clone();
    axum::serve(listener, router(relay))
        .with_graceful_shutdown(async move {
            shutdown.await;
            on_stop.wipe_all("shutdown");
        })
        .await
}

/// Periodically wipes idle rooms, at the configured sweep interval.
pub fn spawn_sweeper(relay: Relay) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(relay.config().sweep_interval);
        tick.tick().await;
        loop {
            tick.tick().await;
            relay.sweep();
        }
    })
}

/// A relay serving on a bound socket, with its sweeper.
pub struct RunningRelay {
    pub addr: SocketAddr,
    pub relay: Relay,
    stop: Option<oneshot::Sender<()>>,
    server: JoinHandle<io::Result<()>>,
    sweeper: JoinHandle<()>,
}

impl RunningRelay {
    pub async fn start(relay: Relay, listener: TcpListener) -> io::Result<Self> {
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let server = tokio::spawn(serve(relay.clone(), listener, async move {
            let _ = stopped.await;
        }));
        let sweeper = spawn_sweeper(relay.clone());
        Ok(Self { addr, relay, stop: Some(stop), server, sweeper })
    }

    pub async fn bind(relay: Relay) -> io::Result<Self> {
        let listener = TcpListener::bind(relay.config().listen_address).await?;
        Self::start(relay, listener).await
    }

    pub fn http_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws", self.addr)
    }

    pub async fn shutdown(mut self) -> io::Result<()> {
        self.sweeper.abort();
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        (&mut self.server).await.unwrap_or(Ok(()))
    }
}

impl Drop for RunningRelay {
    fn drop(&mut self) {
        self.sweeper.abort();
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}
