//! The opaque ciphertext container that is all a relay ever sees.
//!
//! Layout: `version (1) ‖ nonce (12) ‖ ciphertext ‖ tag (16)`.

use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

pub const ENVELOPE_VERSION: u8 = 0x01;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Bytes an envelope adds on top of its plaintext.
pub const ENVELOPE_OVERHEAD: usize = 1 + NONCE_LEN + TAG_LEN;

/// Opaque envelope bytes. Nothing in this type interprets the contents.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EncryptedEnvelope(Vec<u8>);

impl EncryptedEnvelope {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Standard base64 with padding, the form used inside wire messages and credential files.
    pub fn to_base64(&self) -> String {
        STANDARD.encode(&self.0)
    }

    pub fn from_base64(text: &str) -> Result<Self, base64::DecodeError> {
        STANDARD.decode(text.trim()).map(Self)
    }
}

impl fmt::Debug for EncryptedEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EncryptedEnvelope({} bytes)", self.0.len())
    }
}

impl From<Vec<u8>> for EncryptedEnvelope {
    fn from(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }
}

pub(crate) mod base64_field {
    use super::EncryptedEnvelope;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(env: &EncryptedEnvelope, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&env.to_base64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<EncryptedEnvelope, D::Error> {
        let text = String::deserialize(d)?;
        EncryptedEnvelope::from_base64(&text).map_err(serde::de::Error::custom)
    }
}
