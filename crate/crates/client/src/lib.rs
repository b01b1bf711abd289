//! Participant side of a blind signing room.
//!
//! The coordinator generates the room key and admin secret, keeps the
//! encrypted admin token in a [`CredentialStore`], and hands out a link whose
//! fragment carries the key. Guests join with the link alone. Both roles
//! merge every PSBT they receive and log what happened for the audit receipt.

pub mod broadcast;
pub mod clock;
pub mod credentials;
pub mod driver;
pub mod error;
pub mod events;
pub mod receipt;
pub mod session;
pub mod transport;

pub use clock::{SteppingClock, SystemWallClock, WallClock};
pub use credentials::{CredentialStore, FileStore, MemoryStore};
pub use driver::{Coordinator, Guest, Live, DEFAULT_WAIT};
pub use error::SessionError;
pub use events::{EventKind, EventLog, EventRecord};
pub use receipt::{verify_receipt, AuditReceipt, DirSink, MemorySink, ReceiptSink};
pub use session::{CoordinatorSession, CoordinatorState, GuestSession, GuestState, Participant, RoomMaterial, Step, Update};
pub use transport::{FrameObserver, FrameRecorder, WsTransport};
