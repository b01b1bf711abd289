//! The blind relay: rooms that exist only in memory, fan-out of opaque
//! envelopes, admin checks by byte comparison, and hard wipes on close or
//! idle expiry.
//!
//! This crate depends on `blindroom-core` without its `crypto` feature. No
//! code here can hold a room key or open an envelope.

pub mod admin;
pub mod clock;
pub mod config;
pub mod http;
pub mod log;
pub mod metrics;
pub mod relay;
pub mod tap;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ConfigError, RelayConfig};
pub use http::{router, serve, spawn_sweeper, RunningRelay};
pub use log::{LogSink, MemoryLog, TracingLog};
pub use metrics::MetricsSnapshot;
pub use relay::{Connection, Outbound, Outbox, Relay, RelayError};
pub use tap::IngressTap;
