use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticRequests {
    /// Asset found and served, in full or as 304.
    pub hit: u64,
    /// Not found or rejected.
    pub miss: u64,
}

/// Counts only. Nothing here can carry key or payload material.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub active_rooms: u64,
    pub total_rooms_created: u64,
    pub total_rooms_wiped: u64,
    pub messages_relayed: u64,
    pub bytes_relayed: u64,
    pub static_requests: StaticRequests,
    pub websocket_upgrades: u64,
    /// The relay has no durable storage, so this is always 0.
    pub persisted_bytes: u64,
}

#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub rooms_created: AtomicU64,
    pub rooms_wiped: AtomicU64,
    pub messages_relayed: AtomicU64,
    pub bytes_relayed: AtomicU64,
    pub static_hit: AtomicU64,
    pub static_miss: AtomicU64,
    pub websocket_upgrades: AtomicU64,
}

impl Counters {
    pub fn bump(counter: &AtomicU64, by: u64) {
        counter.fetch_add(by, Ordering::Relaxed);
    }

    pub fn snapshot(&self, active_rooms: u64) -> MetricsSnapshot {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        MetricsSnapshot {
            active_rooms,
            total_rooms_created: get(&self.rooms_created),
            total_rooms_wiped: get(&self.rooms_wiped),
            messages_relayed: get(&self.messages_relayed),
            bytes_relayed: get(&self.bytes_relayed),
            static_requests: StaticRequests { hit: get(&self.static_hit), miss: get(&self.static_miss) },
            websocket_upgrades: get(&self.websocket_upgrades),
            persisted_bytes: 0,
        }
    }
}
