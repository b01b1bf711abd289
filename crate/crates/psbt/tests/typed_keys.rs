//! Typed-key shape rules: each malformed pair is spliced into an otherwise
//! valid PSBT, which must then fail to parse with the matching kind.

use std::fs;

use blindroom_psbt::psbt::{global, input, output, MAGIC};
use blindroom_psbt::{ParseError, Psbt, Section};
use sha2::{Digest, Sha256};

fn base() -> Psbt {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/p2wsh_2of3/signed_a.psbt");
    Psbt::parse(&fs::read(path).unwrap()).unwrap()
}

fn pubkey() -> Vec<u8> {
    base().partial_sigs(0)[0].0.to_vec()
}

fn with_input(key: Vec<u8>, value: Vec<u8>) -> Vec<u8> {
    let mut p = base();
    p.input_mut(0).unwrap().insert(key, value);
    p.serialize()
}

fn with_output(key: Vec<u8>, value: Vec<u8>) -> Vec<u8> {
    let mut p = base();
    p.output_mut(1).unwrap().insert(key, value);
    p.serialize()
}

fn with_global(key: Vec<u8>, value: Vec<u8>) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.push(key.len() as u8);
    out.extend_from_slice(&key);
    out.push(value.len() as u8);
    out.extend_from_slice(&value);
    out.extend_from_slice(&base().serialize()[MAGIC.len()..]);
    out
}

fn kind(bytes: Vec<u8>) -> (&'static str, Option<(Section, u8)>) {
    match Psbt::parse(&bytes).unwrap_err() {
        e @ (ParseError::InvalidKey { section, key_type, .. } | ParseError::InvalidValue { section, key_type, .. }) => {
            (e.kind(), Some((section, key_type)))
        }
        e => (e.kind(), None),
    }
}

fn keyed(t: u8, data: &[u8]) -> Vec<u8> {
    [&[t], data].concat()
}

#[test]
fn splice_helpers_produce_valid_psbts() {
    let mut p = base();
    p.input_mut(0).unwrap().insert(vec![0xf0, 1], vec![2]);
    p.output_mut(1).unwrap().insert(vec![0xf0, 1], vec![2]);
    assert!(Psbt::parse(&p.serialize()).is_ok());
    assert!(Psbt::parse(&with_global(vec![0xf0, 1], vec![2])).is_ok());
}

#[test]
fn global_typed_keys() {
    let tx = base().unsigned_tx_bytes().to_vec();
    let dup_tx = with_global(vec![global::UNSIGNED_TX, 0x00], tx);
    assert_eq!(kind(dup_tx), ("invalid-key", Some((Section::Global, global::UNSIGNED_TX))));
    assert_eq!(kind(with_global(vec![global::XPUB, 1, 2, 3], vec![0; 4])).0, "invalid-key");
    assert_eq!(kind(with_global(vec![global::VERSION, 0], vec![0; 4])).0, "invalid-key");
    assert_eq!(kind(with_global(vec![global::VERSION], vec![0; 3])).0, "invalid-value");
    assert_eq!(kind(with_global(vec![global::VERSION], vec![2, 0, 0, 0])).0, "unsupported-version");
    assert_eq!(kind(with_global(vec![0x02], vec![0; 4])).0, "invalid-key");
    assert!(Psbt::parse(&with_global(vec![global::VERSION], vec![0; 4])).is_ok());
}

#[test]
fn input_typed_keys() {
    let key = pubkey();
    let cases: Vec<(Vec<u8>, Vec<u8>, &str, u8)> = vec![
        (vec![input::NON_WITNESS_UTXO, 0], vec![0; 10], "invalid-key", input::NON_WITNESS_UTXO),
        (vec![input::WITNESS_UTXO, 0], vec![0; 9], "invalid-key", input::WITNESS_UTXO),
        (keyed(input::PARTIAL_SIG, &key[..32]), vec![0x30], "invalid-key", input::PARTIAL_SIG),
        (keyed(input::PARTIAL_SIG, &[&[0x05], &key[1..]].concat()), vec![0x30], "invalid-key", input::PARTIAL_SIG),
        (vec![input::SIGHASH_TYPE, 0], vec![1, 0, 0, 0], "invalid-key", input::SIGHASH_TYPE),
        (vec![input::REDEEM_SCRIPT, 0], vec![0x51], "invalid-key", input::REDEEM_SCRIPT),
        (vec![input::WITNESS_SCRIPT, 0], vec![0x51], "invalid-key", input::WITNESS_SCRIPT),
        (keyed(input::BIP32_DERIVATION, &key[..20]), vec![0; 4], "invalid-key", input::BIP32_DERIVATION),
        (vec![input::FINAL_SCRIPTSIG, 0], vec![0x51], "invalid-key", input::FINAL_SCRIPTSIG),
        (vec![input::FINAL_SCRIPTWITNESS, 0], vec![0], "invalid-key", input::FINAL_SCRIPTWITNESS),
        (vec![input::SIGHASH_TYPE], vec![1, 0], "invalid-value", input::SIGHASH_TYPE),
        (vec![input::FINAL_SCRIPTWITNESS], vec![2, 1], "invalid-value", input::FINAL_SCRIPTWITNESS),
        (keyed(input::BIP32_DERIVATION, &key), vec![0; 5], "invalid-value", input::BIP32_DERIVATION),
        (vec![0x0e], vec![0; 32], "invalid-key", 0x0e),
    ];
    for (k, v, expected, key_type) in cases {
        let label = hex::encode(&k);
        // Overwrite rather than duplicate when the fixture already carries the key.
        assert_eq!(kind(with_input(k, v)), (expected, Some((Section::Input(0), key_type))), "{label}");
    }
}

#[test]
fn hash_preimages_are_checked() {
    let preimage = b"preimage".to_vec();
    let sha = Sha256::digest(&preimage).to_vec();
    assert!(Psbt::parse(&with_input(keyed(input::SHA256, &sha), preimage.clone())).is_ok());
    assert_eq!(kind(with_input(keyed(input::SHA256, &sha), b"other".to_vec())).0, "invalid-value");
    assert_eq!(kind(with_input(keyed(input::SHA256, &sha[..20]), preimage.clone())).0, "invalid-key");
    assert_eq!(kind(with_input(keyed(input::RIPEMD160, &[0; 20]), preimage.clone())).0, "invalid-value");
    assert_eq!(kind(with_input(keyed(input::HASH160, &[0; 32]), preimage.clone())).0, "invalid-key");
    assert_eq!(kind(with_input(keyed(input::HASH256, &sha), preimage)).0, "invalid-value");
}

#[test]
fn output_typed_keys() {
    let key = pubkey();
    assert_eq!(kind(with_output(vec![output::REDEEM_SCRIPT, 0], vec![0x51])), ("invalid-key", Some((Section::Output(1), 0))));
    assert_eq!(kind(with_output(vec![output::WITNESS_SCRIPT, 0], vec![0x51])).0, "invalid-key");
    assert_eq!(kind(with_output(keyed(output::BIP32_DERIVATION, &key[..32]), vec![0; 4])).0, "invalid-key");
    assert_eq!(kind(with_output(keyed(output::BIP32_DERIVATION, &key), vec![])).0, "invalid-value");
    assert_eq!(kind(with_output(vec![output::TAP_INTERNAL_KEY], vec![0; 31])).0, "invalid-value");
    assert_eq!(kind(with_output(vec![0x03], vec![0; 8])).0, "invalid-key");
}

#[test]
fn non_witness_utxo_must_match_the_outpoint() {
    let mut p = base();
    let tx = Psbt::parse(&fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/mixed_2of3/unsigned.psbt")).unwrap())
        .unwrap()
        .unsigned_tx_bytes()
        .to_vec();
    p.input_mut(0).unwrap().insert(vec![input::NON_WITNESS_UTXO], tx);
    assert_eq!(kind(p.serialize()).0, "invalid-value");
}
