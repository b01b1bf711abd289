//! Shape rules for typed keys and values of version 0 PSBTs, including the
//! taproot fields. Unknown and proprietary types pass through unchecked.

use k256::PublicKey;
use ripemd::Ripemd160;
use sha2::{Digest, Sha256};

use crate::encode::Reader;
use crate::psbt::{global, input, output, ParseError, Section};
use crate::script::hash160;
use crate::tx::{read_witness, sha256d, Transaction, TxOut};

fn valid_pubkey(bytes: &[u8]) -> bool {
    match bytes.len() {
        33 if matches!(bytes[0], 0x02 | 0x03) => PublicKey::from_sec1_bytes(bytes).is_ok(),
        65 if bytes[0] == 0x04 => PublicKey::from_sec1_bytes(bytes).is_ok(),
        _ => false,
    }
}

/// An x-only key is valid when some point on the curve has that x coordinate.
fn valid_xonly(bytes: &[u8]) -> bool {
    if bytes.len() != 32 {
        return false;
    }
    let mut sec1 = [0u8; 33];
    sec1[0] = 0x02;
    sec1[1..].copy_from_slice(bytes);
    PublicKey::from_sec1_bytes(&sec1).is_ok()
}

fn valid_key_source(value: &[u8]) -> bool {
    !value.is_empty() && value.len() % 4 == 0
}

fn valid_tap_key_source(value: &[u8]) -> bool {
    let mut r = Reader::new(value);
    let Ok(n) = r.count(32) else { return false };
    r.take(n * 32).is_ok() && valid_key_source(&value[r.position()..])
}

fn valid_schnorr_sig(value: &[u8]) -> bool {
    match value.len() {
        64 => true,
        // 0x00 must be expressed by omitting the byte.
        65 => value[64] != 0x00,
        _ => false,
    }
}

fn valid_control_block(cb: &[u8]) -> bool {
    cb.len() >= 33 && (cb.len() - 33) % 32 == 0 && (cb.len() - 33) / 32 <= 128 && valid_xonly(&cb[1..33])
}

fn valid_tap_tree(value: &[u8]) -> bool {
    let mut r = Reader::new(value);
    if r.is_empty() {
        return false;
    }
    while !r.is_empty() {
        let Ok(depth) = r.u8() else { return false };
        if depth > 128 || r.u8().is_err() || r.var_bytes().is_err() {
            return false;
        }
    }
    true
}

fn valid_witness(value: &[u8]) -> bool {
    let mut r = Reader::new(value);
    read_witness(&mut r).is_ok() && r.is_empty()
}

pub(crate) fn check(section: Section, key: &[u8], value: &[u8]) -> Result<(), ParseError> {
    let key_type = key[0];
    let data = &key[1..];
    let bad_key = |reason| Err(ParseError::InvalidKey { section, key_type, reason });
    let bad_value = |reason| Err(ParseError::InvalidValue { section, key_type, reason });
    macro_rules! need_empty_key {
        () => {
            if !data.is_empty() {
                return bad_key("key must be the type byte alone");
            }
        };
    }
    match section {
        Section::Global => match key_type {
            global::UNSIGNED_TX => need_empty_key!(),
            global::XPUB => {
                if data.len() != 78 {
                    return bad_key("extended key must be 78 bytes");
                }
                if !valid_key_source(value) {
                    return bad_value("bad key origin");
                }
            }
            global::VERSION => {
                need_empty_key!();
                if value.len() != 4 {
                    return bad_value("version must be 4 bytes");
                }
            }
            t if global::V2_ONLY.contains(&t) && data.is_empty() => return bad_key("version 2 field in a version 0 psbt"),
            _ => {}
        },
        Section::Input(_) => match key_type {
            input::NON_WITNESS_UTXO => {
                need_empty_key!();
                if Transaction::decode(value).is_err() {
                    return bad_value("utxo is not a transaction");
                }
            }
            input::WITNESS_UTXO => {
                need_empty_key!();
                if TxOut::decode(value).is_err() {
                    return bad_value("utxo is not a transaction output");
                }
            }
            input::PARTIAL_SIG => {
                if !valid_pubkey(data) {
                    return bad_key("invalid public key");
                }
                if value.is_empty() {
                    return bad_value("empty signature");
                }
            }
            input::SIGHASH_TYPE => {
                need_empty_key!();
                if value.len() != 4 {
                    return bad_value("sighash type must be 4 bytes");
                }
            }
            input::REDEEM_SCRIPT | input::WITNESS_SCRIPT | input::FINAL_SCRIPTSIG | input::POR_COMMITMENT => {
                need_empty_key!()
            }
            input::FINAL_SCRIPTWITNESS => {
                need_empty_key!();
                if !valid_witness(value) {
                    return bad_value("malformed witness stack");
                }
            }
            input::BIP32_DERIVATION => {
                if !valid_pubkey(data) {
                    return bad_key("invalid public key");
                }
                if !valid_key_source(value) {
                    return bad_value("bad key origin");
                }
            }
            input::RIPEMD160 | input::SHA256 | input::HASH160 | input::HASH256 => {
                let digest: Vec<u8> = match key_type {
                    input::RIPEMD160 => <Ripemd160 as ripemd::Digest>::digest(value).to_vec(),
                    input::SHA256 => Sha256::digest(value).to_vec(),
                    input::HASH160 => hash160(value).to_vec(),
                    _ => sha256d(value).to_vec(),
                };
                if data.len() != digest.len() {
                    return bad_key("hash has the wrong length");
                }
                if data != digest {
                    return bad_value("preimage does not match hash");
                }
            }
            t if input::V2_ONLY.contains(&t) && data.is_empty() => return bad_key("version 2 field in a version 0 psbt"),
            input::TAP_KEY_SIG => {
                need_empty_key!();
                if !valid_schnorr_sig(value) {
                    return bad_value("invalid taproot signature");
                }
            }
            input::TAP_SCRIPT_SIG => {
                if data.len() != 64 || !valid_xonly(&data[..32]) {
                    return bad_key("expected x-only key and leaf hash");
                }
                if !valid_schnorr_sig(value) {
                    return bad_value("invalid taproot signature");
                }
            }
            input::TAP_LEAF_SCRIPT => {
                if !valid_control_block(data) {
                    return bad_key("invalid control block");
                }
                if value.is_empty() {
                    return bad_value("missing leaf version");
                }
            }
            input::TAP_BIP32_DERIVATION => {
                if !valid_xonly(data) {
                    return bad_key("invalid x-only public key");
                }
                if !valid_tap_key_source(value) {
                    return bad_value("bad taproot key origin");
                }
            }
            input::TAP_INTERNAL_KEY => {
                need_empty_key!();
                if !valid_xonly(value) {
                    return bad_value("invalid x-only public key");
                }
            }
            input::TAP_MERKLE_ROOT => {
                need_empty_key!();
                if value.len() != 32 {
                    return bad_value("merkle root must be 32 bytes");
                }
            }
            _ => {}
        },
        Section::Output(_) => match key_type {
            output::REDEEM_SCRIPT | output::WITNESS_SCRIPT => need_empty_key!(),
            output::BIP32_DERIVATION => {
                if !valid_pubkey(data) {
                    return bad_key("invalid public key");
                }
                if !valid_key_source(value) {
                    return bad_value("bad key origin");
                }
            }
            t if output::V2_ONLY.contains(&t) && data.is_empty() => return bad_key("version 2 field in a version 0 psbt"),
            output::TAP_INTERNAL_KEY => {
                need_empty_key!();
                if !valid_xonly(value) {
                    return bad_value("invalid x-only public key");
                }
            }
            output::TAP_TREE => {
                need_empty_key!();
                if !valid_tap_tree(value) {
                    return bad_value("malformed taproot tree");
                }
            }
            output::TAP_BIP32_DERIVATION => {
                if !valid_xonly(data) {
                    return bad_key("invalid x-only public key");
                }
                if !valid_tap_key_source(value) {
                    return bad_value("bad taproot key origin");
                }
            }
            _ => {}
        },
    }
    Ok(())
}
