use blindroom_core::WireMessage;

use crate::log::LogSink;

/// Sees every decoded inbound frame before the relay acts on it.
///
/// Production relays install none. Tests install deliberately leaky taps to
/// check that the blindness and storage audits notice a misbehaving relay.
pub trait IngressTap: Send + Sync {
    fn inspect(&self, frame: &WireMessage, log: &dyn LogSink);
}
