//! WebSocket carriage of wire frames.

use std::sync::{Arc, Mutex};

use blindroom_core::{decode_wire, encode_wire, WireMessage};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::error::SessionError;

/// Sees every text frame in both directions, exactly as it crossed the wire.
pub trait FrameObserver: Send + Sync {
    fn sent(&self, text: &str);
    fn received(&self, text: &str);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// Records frames in order.
#[derive(Debug, Default, Clone)]
pub struct FrameRecorder {
    frames: Arc<Mutex<Vec<(Direction, String)>>>,
}

impl FrameRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frames(&self) -> Vec<(Direction, String)> {
        self.frames.lock().unwrap().clone()
    }
}

impl FrameObserver for FrameRecorder {
    fn sent(&self, text: &str) {
        self.frames.lock().unwrap().push((Direction::Sent, text.to_owned()));
    }

    fn received(&self, text: &str) {
        self.frames.lock().unwrap().push((Direction::Received, text.to_owned()));
    }
}

/// `http://h:p` becomes `ws://h:p/ws`; `https` becomes `wss`.
pub fn ws_url(relay_base: &str) -> Result<String, SessionError> {
    let base = relay_base.trim_end_matches('/');
    let rest = if let Some(r) = base.strip_prefix("http://") {
        format!("ws://{r}")
    } else if let Some(r) = base.strip_prefix("https://") {
        format!("wss://{r}")
    } else if base.starts_with("ws://") || base.starts_with("wss://") {
        base.to_owned()
    } else {
        return Err(SessionError::RelayUnreachable(format!("unsupported relay address {relay_base:?}")));
    };
    Ok(format!("{rest}/ws"))
}

pub struct WsTransport {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    observer: Option<Arc<dyn FrameObserver>>,
    undecodable: u64,
    upgrade_cache_control: Option<String>,
}

impl WsTransport {
    pub async fn connect(relay_base: &str, observer: Option<Arc<dyn FrameObserver>>) -> Result<Self, SessionError> {
        let url = ws_url(relay_base)?;
        let (ws, resp) = tokio_tungstenite::connect_async(url.as_str())
            .await
            .map_err(|e| SessionError::RelayUnreachable(e.to_string()))?;
        let upgrade_cache_control =
            resp.headers().get("cache-control").and_then(|v| v.to_str().ok()).map(str::to_owned);
        Ok(Self { ws, observer, undecodable: 0, upgrade_cache_control })
    }

    pub async fn send(&mut self, msg: &WireMessage) -> Result<(), SessionError> {
        let text = encode_wire(msg);
        if let Some(o) = &self.observer {
            o.sent(&text);
        }
        self.ws.send(Message::text(text)).await.map_err(|_| SessionError::ConnectionLost)
    }

    /// The next decodable frame, or `None` once the relay has closed the socket.
    pub async fn recv(&mut self) -> Result<Option<WireMessage>, SessionError> {
        loop {
            match self.ws.next().await {
                None | Some(Ok(Message::Close(_))) => return Ok(None),
                Some(Err(_)) => return Err(SessionError::ConnectionLost),
                Some(Ok(Message::Text(t))) => {
                    if let Some(o) = &self.observer {
                        o.received(t.as_str());
                    }
                    match decode_wire(t.as_str()) {
                        Ok(m) => return Ok(Some(m)),
                        Err(_) => self.undecodable += 1,
                    }
                }
                Some(Ok(_)) => {}
            }
        }
    }

    /// Frames from the relay that were not valid wire messages.
    pub fn undecodable(&self) -> u64 {
        self.undecodable
    }

    /// `Cache-Control` of the relay's 101 response, if it sent one.
    pub fn upgrade_cache_control(&self) -> Option<&str> {
        self.upgrade_cache_control.as_deref()
    }

    pub async fn close(&mut self) {
        let _ = self.ws.close(None).await;
    }
}
