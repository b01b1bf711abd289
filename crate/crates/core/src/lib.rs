//! Shared foundation for blind relay rooms.
//!
//! Everything here is a pure value or function. The relay depends on this
//! crate with default features off, which removes room keys and every
//! seal/open routine from its build; it only ever handles
//! [`EncryptedEnvelope`] bytes.

pub mod envelope;
pub mod ids;
pub mod redact;
pub mod wire;

#[cfg(feature = "crypto")]
pub mod crypto;
#[cfg(feature = "crypto")]
pub mod link;

pub use envelope::EncryptedEnvelope;
pub use ids::{AdminSecret, BadUuid, RoomId, SessionId};
pub use wire::{decode_wire, encode_wire, AdminAction, ErrorCode, NotifyEvent, WireError, WireMessage};

#[cfg(feature = "crypto")]
pub use crypto::{decrypt, encrypt, CryptoError, Purpose, RoomKey};
#[cfg(feature = "crypto")]
pub use link::{format_room_link, parse_room_link, LinkError, RoomLink};
