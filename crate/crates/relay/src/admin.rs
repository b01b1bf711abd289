//! Admin token check: a byte comparison of two opaque envelopes.

use std::sync::atomic::{AtomicU64, Ordering};

use blindroom_core::EncryptedEnvelope;
use subtle::ConstantTimeEq;

/// Counts calls to [`tokens_match`] so tests can prove the admin path goes through it.
#[derive(Debug, Default)]
pub struct ComparisonCounter(AtomicU64);

impl ComparisonCounter {
    pub fn get(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Constant-time in the token bytes. Only the length can short-circuit,
/// and token length is not secret.
pub fn tokens_match(stored: &EncryptedEnvelope, presented: &EncryptedEnvelope, counter: &ComparisonCounter) -> bool {
    counter.0.fetch_add(1, Ordering::SeqCst);
    stored.as_bytes().ct_eq(presented.as_bytes()).into()
}
