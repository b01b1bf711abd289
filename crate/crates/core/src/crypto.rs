//! Room keys and AES-256-GCM envelope sealing.
//!
//! Every envelope is bound to its room and use through the associated data
//! `version ‖ room id text ‖ purpose label`, so an admin token can never be
//! replayed as a PSBT payload, nor an envelope moved between rooms.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::Aes256Gcm;
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

use crate::envelope::{EncryptedEnvelope, ENVELOPE_OVERHEAD, ENVELOPE_VERSION, NONCE_LEN, TAG_LEN};
use crate::ids::RoomId;

pub const KEY_LEN: usize = 32;
/// Length of the unpadded base64url text of a room key.
pub const KEY_FRAGMENT_LEN: usize = 43;
/// Largest plaintext `encrypt` accepts: the envelope then fits the relay's default 2 MiB limit.
pub const MAX_PLAINTEXT_LEN: usize = 2 * 1024 * 1024 - ENVELOPE_OVERHEAD;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("plaintext of {len} bytes exceeds the {max} byte limit")]
    TooLarge { len: usize, max: usize },
    #[error("unknown envelope version {0:#04x}")]
    UnknownVersion(u8),
    #[error("envelope of {0} bytes is too short")]
    MalformedLength(usize),
    /// Tampering, wrong key, wrong room and wrong purpose all look the same.
    #[error("envelope authentication failed")]
    TagMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("room key must be {KEY_FRAGMENT_LEN} base64url characters encoding {KEY_LEN} bytes")]
pub struct BadKeyEncoding;

/// The 256-bit symmetric key shared only through the link fragment.
#[derive(Clone, PartialEq, Eq)]
pub struct RoomKey([u8; KEY_LEN]);

impl RoomKey {
    /// Draws a fresh key from the OS randomness source.
    ///
    /// Panics if the OS cannot provide randomness; there is no safe fallback.
    pub fn generate() -> Self {
        let mut bytes = [0u8; KEY_LEN];
        getrandom::fill(&mut bytes).expect("OS randomness source unavailable");
        Self(bytes)
    }

    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn to_fragment(&self) -> String {
        URL_SAFE_NO_PAD.encode(self.0)
    }

    pub fn from_fragment(text: &str) -> Result<Self, BadKeyEncoding> {
        if text.len() != KEY_FRAGMENT_LEN {
            return Err(BadKeyEncoding);
        }
        let bytes = URL_SAFE_NO_PAD.decode(text).map_err(|_| BadKeyEncoding)?;
        let bytes: [u8; KEY_LEN] = bytes.try_into().map_err(|_| BadKeyEncoding)?;
        Ok(Self(bytes))
    }
}

impl fmt::Debug for RoomKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RoomKey(<redacted>)")
    }
}

impl Drop for RoomKey {
    fn drop(&mut self) {
        for b in self.0.iter_mut() {
            // SAFETY: `b` is a valid, aligned, exclusive reference into our own array.
            unsafe { std::ptr::write_volatile(b, 0) };
        }
    }
}

/// What an envelope carries. Part of the associated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Psbt,
    Token,
    /// Reserved; no flow sends chat yet.
    Chat,
}

impl Purpose {
    pub fn label(self) -> &'static str {
        match self {
            Purpose::Psbt => "psbt",
            Purpose::Token => "token",
            Purpose::Chat => "chat",
        }
    }
}

/// Associated data binding an envelope to its room and purpose.
pub fn associated_data(room: &RoomId, purpose: Purpose) -> Vec<u8> {
    let room = room.to_string();
    let mut aad = Vec::with_capacity(1 + room.len() + 5);
    aad.push(ENVELOPE_VERSION);
    aad.extend_from_slice(room.as_bytes());
    aad.extend_from_slice(purpose.label().as_bytes());
    aad
}

/// Raw AES-256-GCM sealing, returning `ciphertext ‖ tag`.
///
/// This is the exact primitive envelopes are built on, exposed so it can be
/// checked against published known-answer vectors.
pub fn aes256gcm_seal(key: &[u8; KEY_LEN], nonce: &[u8; NONCE_LEN], aad: &[u8], plaintext: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .encrypt(nonce.into(), Payload { msg: plaintext, aad })
        .expect("AES-GCM input bounded by MAX_PLAINTEXT_LEN")
}

/// Raw AES-256-GCM opening of `ciphertext ‖ tag`.
pub fn aes256gcm_open(
    key: &[u8; KEY_LEN],
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    ciphertext_and_tag: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .decrypt(nonce.into(), Payload { msg: ciphertext_and_tag, aad })
        .map_err(|_| CryptoError::TagMismatch)
}

/// Seals `plaintext` under a fresh random 96-bit nonce.
pub fn encrypt(key: &RoomKey, room: &RoomId, purpose: Purpose, plaintext: &[u8]) -> Result<EncryptedEnvelope, CryptoError> {
    let mut nonce = [0u8; NONCE_LEN];
    getrandom::fill(&mut nonce).expect("OS randomness source unavailable");
    encrypt_with_nonce(key, &nonce, room, purpose, plaintext)
}

/// Seals with a caller-chosen nonce. Callers outside tests should use [`encrypt`].
pub fn encrypt_with_nonce(
    key: &RoomKey,
    nonce: &[u8; NONCE_LEN],
    room: &RoomId,
    purpose: Purpose,
    plaintext: &[u8],
) -> Result<EncryptedEnvelope, CryptoError> {
    if plaintext.len() > MAX_PLAINTEXT_LEN {
        return Err(CryptoError::TooLarge { len: plaintext.len(), max: MAX_PLAINTEXT_LEN });
    }
    let aad = associated_data(room, purpose);
    let sealed = aes256gcm_seal(key.as_bytes(), nonce, &aad, plaintext);
    let mut out = Vec::with_capacity(1 + NONCE_LEN + sealed.len());
    out.push(ENVELOPE_VERSION);
    out.extend_from_slice(nonce);
    out.extend_from_slice(&sealed);
    Ok(EncryptedEnvelope::from_bytes(out))
}

pub fn decrypt(key: &RoomKey, room: &RoomId, purpose: Purpose, env: &EncryptedEnvelope) -> Result<Vec<u8>, CryptoError> {
    let bytes = env.as_bytes();
    if bytes.len() < ENVELOPE_OVERHEAD {
        return Err(CryptoError::MalformedLength(bytes.len()));
    }
    if bytes[0] != ENVELOPE_VERSION {
        return Err(CryptoError::UnknownVersion(bytes[0]));
    }
    let nonce: &[u8; NONCE_LEN] = bytes[1..1 + NONCE_LEN].try_into().expect("length checked");
    let body = &bytes[1 + NONCE_LEN..];
    debug_assert!(body.len() >= TAG_LEN);
    aes256gcm_open(key.as_bytes(), nonce, &associated_data(room, purpose), body)
}
