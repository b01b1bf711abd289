//! Segwit v0 signature hashing and ECDSA checks.

use k256::ecdsa::signature::hazmat::PrehashVerifier;
use k256::ecdsa::{Signature, VerifyingKey};

use crate::encode::write_var_bytes;
use crate::tx::{sha256d, Transaction};

pub const SIGHASH_ALL: u32 = 0x01;
pub const SIGHASH_NONE: u32 = 0x02;
pub const SIGHASH_SINGLE: u32 = 0x03;
pub const SIGHASH_ANYONECANPAY: u32 = 0x80;

/// Digest a segwit v0 input signs, for `script_code` spending `amount` sats.
pub fn segwit_v0_sighash(tx: &Transaction, index: usize, script_code: &[u8], amount: u64, sighash_type: u32) -> [u8; 32] {
    let base = sighash_type & 0x1f;
    let anyone_can_pay = sighash_type & SIGHASH_ANYONECANPAY != 0;
    let zero = [0u8; 32];

    let hash_prevouts = if anyone_can_pay {
        zero
    } else {
        let mut buf = Vec::with_capacity(36 * tx.inputs.len());
        for i in &tx.inputs {
            buf.extend_from_slice(i.previous_output.txid.as_digest());
            buf.extend_from_slice(&i.previous_output.vout.to_le_bytes());
        }
        sha256d(&buf)
    };
    let hash_sequence = if anyone_can_pay || base == SIGHASH_SINGLE || base == SIGHASH_NONE {
        zero
    } else {
        let buf: Vec<u8> = tx.inputs.iter().flat_map(|i| i.sequence.to_le_bytes()).collect();
        sha256d(&buf)
    };
    let hash_outputs = if base != SIGHASH_SINGLE && base != SIGHASH_NONE {
        let mut buf = Vec::new();
        for o in &tx.outputs {
            o.encode_to(&mut buf);
        }
        sha256d(&buf)
    } else if base == SIGHASH_SINGLE && index < tx.outputs.len() {
        sha256d(&tx.outputs[index].serialize())
    } else {
        zero
    };

    let input = &tx.inputs[index];
    let mut pre = Vec::with_capacity(160 + script_code.len());
    pre.extend_from_slice(&tx.version.to_le_bytes());
    pre.extend_from_slice(&hash_prevouts);
    pre.extend_from_slice(&hash_sequence);
    pre.extend_from_slice(input.previous_output.txid.as_digest());
    pre.extend_from_slice(&input.previous_output.vout.to_le_bytes());
    write_var_bytes(&mut pre, script_code);
    pre.extend_from_slice(&amount.to_le_bytes());
    pre.extend_from_slice(&input.sequence.to_le_bytes());
    pre.extend_from_slice(&hash_outputs);
    pre.extend_from_slice(&tx.lock_time.to_le_bytes());
    pre.extend_from_slice(&sighash_type.to_le_bytes());
    sha256d(&pre)
}

/// Checks a DER signature (without its sighash byte) over `digest`.
/// High-S signatures are rejected, as Bitcoin relay policy does.
pub fn verify_ecdsa(pubkey: &[u8], der: &[u8], digest: &[u8; 32]) -> bool {
    let Ok(key) = VerifyingKey::from_sec1_bytes(pubkey) else { return false };
    let Ok(sig) = Signature::from_der(der) else { return false };
    key.verify_prehash(digest, &sig).is_ok()
}
