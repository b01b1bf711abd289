//! PSBT container: parse, serialize, combine, fingerprint.
//!
//! Maps keep their entries in arrival order so that accepted input
//! re-serializes byte for byte. Equality and the fingerprint ignore that
//! order, which is what makes `combine` commutative.

use std::collections::BTreeMap;
use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use sha2::{Digest, Sha256};

use crate::encode::{write_var_bytes, DecodeError, Reader};
use crate::keys;
use crate::tx::{Transaction, TxOut};

pub const MAGIC: &[u8; 5] = b"psbt\xff";

pub mod global {
    pub const UNSIGNED_TX: u8 = 0x00;
    pub const XPUB: u8 = 0x01;
    pub const VERSION: u8 = 0xfb;
    pub const PROPRIETARY: u8 = 0xfc;
    /// Types 0x02..=0x06 belong to version 2 only. Older PSBTs may still carry
    /// unknown pairs of these types with key data, which pass through.
    pub const V2_ONLY: std::ops::RangeInclusive<u8> = 0x02..=0x06;
}

pub mod input {
    pub const NON_WITNESS_UTXO: u8 = 0x00;
    pub const WITNESS_UTXO: u8 = 0x01;
    pub const PARTIAL_SIG: u8 = 0x02;
    pub const SIGHASH_TYPE: u8 = 0x03;
    pub const REDEEM_SCRIPT: u8 = 0x04;
    pub const WITNESS_SCRIPT: u8 = 0x05;
    pub const BIP32_DERIVATION: u8 = 0x06;
    pub const FINAL_SCRIPTSIG: u8 = 0x07;
    pub const FINAL_SCRIPTWITNESS: u8 = 0x08;
    pub const POR_COMMITMENT: u8 = 0x09;
    pub const RIPEMD160: u8 = 0x0a;
    pub const SHA256: u8 = 0x0b;
    pub const HASH160: u8 = 0x0c;
    pub const HASH256: u8 = 0x0d;
    pub const V2_ONLY: std::ops::RangeInclusive<u8> = 0x0e..=0x12;
    pub const TAP_KEY_SIG: u8 = 0x13;
    pub const TAP_SCRIPT_SIG: u8 = 0x14;
    pub const TAP_LEAF_SCRIPT: u8 = 0x15;
    pub const TAP_BIP32_DERIVATION: u8 = 0x16;
    pub const TAP_INTERNAL_KEY: u8 = 0x17;
    pub const TAP_MERKLE_ROOT: u8 = 0x18;
}

pub mod output {
    pub const REDEEM_SCRIPT: u8 = 0x00;
    pub const WITNESS_SCRIPT: u8 = 0x01;
    pub const BIP32_DERIVATION: u8 = 0x02;
    pub const V2_ONLY: std::ops::RangeInclusive<u8> = 0x03..=0x04;
    pub const TAP_INTERNAL_KEY: u8 = 0x05;
    pub const TAP_TREE: u8 = 0x06;
    pub const TAP_BIP32_DERIVATION: u8 = 0x07;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Global,
    Input(usize),
    Output(usize),
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Section::Global => f.write_str("global map"),
            Section::Input(i) => write!(f, "input {i}"),
            Section::Output(i) => write!(f, "output {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("missing psbt magic")]
    BadMagic,
    #[error("input is neither binary psbt nor base64")]
    BadEncoding,
    #[error("data ends early")]
    Truncated,
    #[error("malformed compact size")]
    MalformedVarint,
    #[error("{0}: duplicate key {1}")]
    DuplicateKey(Section, String),
    #[error("global map has no unsigned transaction")]
    MissingUnsignedTx,
    #[error("unsigned transaction carries scriptSig or witness data")]
    SignedTxInGlobal,
    #[error("unsigned transaction does not decode: {0}")]
    MalformedTx(DecodeError),
    #[error("unsupported psbt version {0}")]
    UnsupportedVersion(u32),
    #[error("{section}: key type {key_type:#04x}: {reason}")]
    InvalidKey { section: Section, key_type: u8, reason: &'static str },
    #[error("{section}: key type {key_type:#04x}: {reason}")]
    InvalidValue { section: Section, key_type: u8, reason: &'static str },
    #[error("{0} bytes after the last map")]
    TrailingBytes(usize),
}

impl ParseError {
    /// Stable short name, used by test vectors and the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::BadMagic => "bad-magic",
            ParseError::BadEncoding => "bad-encoding",
            ParseError::Truncated => "truncated",
            ParseError::MalformedVarint => "malformed-varint",
            ParseError::DuplicateKey(..) => "duplicate-key",
            ParseError::MissingUnsignedTx => "missing-unsigned-tx",
            ParseError::SignedTxInGlobal => "signed-tx-in-global",
            ParseError::MalformedTx(_) => "malformed-tx",
            ParseError::UnsupportedVersion(_) => "unsupported-version",
            ParseError::InvalidKey { .. } => "invalid-key",
            ParseError::InvalidValue { .. } => "invalid-value",
            ParseError::TrailingBytes(_) => "trailing-bytes",
        }
    }
}

impl From<DecodeError> for ParseError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Truncated | DecodeError::Oversized => ParseError::Truncated,
            DecodeError::MalformedVarint => ParseError::MalformedVarint,
            DecodeError::TrailingBytes(n) => ParseError::TrailingBytes(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CombineError {
    #[error("psbts describe different unsigned transactions")]
    DifferentUnsignedTx,
    #[error("{section}: conflicting values for key {key}")]
    ConflictingValues { section: Section, key: String },
}

/// One key-value map. Keys include their type byte.
#[derive(Debug, Clone, Default)]
pub struct Map {
    entries: Vec<(Vec<u8>, Vec<u8>)>,
}

impl Map {
    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice())
    }

    /// Value of the single-byte key `key_type`, if present.
    pub fn get_typed(&self, key_type: u8) -> Option<&[u8]> {
        self.get(&[key_type])
    }

    /// Replaces the value in place, or appends a new entry.
    ///
    /// # Panics
    /// On an empty key, which would read back as the map separator.
    pub fn insert(&mut self, key: Vec<u8>, value: Vec<u8>) {
        assert!(!key.is_empty(), "psbt keys carry at least a type byte");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => *v = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn remove(&mut self, key: &[u8]) -> Option<Vec<u8>> {
        let at = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(at).1)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&[u8], &[u8]) -> bool) {
        self.entries.retain(|(k, v)| keep(k, v));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Entries of one type as (key data, value).
    pub fn of_type(&self, key_type: u8) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.iter().filter(move |(k, _)| k[0] == key_type).map(|(k, v)| (&k[1..], v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn sorted(&self) -> BTreeMap<&[u8], &[u8]> {
        self.iter().collect()
    }

    fn write(&self, out: &mut Vec<u8>, sorted: bool) {
        if sorted {
            for (k, v) in self.sorted() {
                write_var_bytes(out, k);
                write_var_bytes(out, v);
            }
        } else {
            for (k, v) in self.iter() {
                write_var_bytes(out, k);
                write_var_bytes(out, v);
            }
        }
        out.push(0x00);
    }

    fn read(r: &mut Reader<'_>, section: Section) -> Result<Self, ParseError> {
        let mut entries: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
        loop {
            let key = r.var_bytes()?;
            if key.is_empty() {
                return Ok(Self { entries });
            }
            let value = r.var_bytes()?;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(ParseError::DuplicateKey(section, hex::encode(key)));
            }
            keys::check(section, key, value)?;
            entries.push((key.to_vec(), value.to_vec()));
        }
    }

    fn merge(&mut self, other: &Map, section: Section) -> Result<(), CombineError> {
        for (k, v) in other.iter() {
            match self.get(k) {
                Some(mine) if mine == v => {}
                Some(_) => return Err(CombineError::ConflictingValues { section, key: hex::encode(k) }),
                None => self.entries.push((k.to_vec(), v.to_vec())),
            }
        }
        Ok(())
    }
}

impl PartialEq for Map {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.sorted() == other.sorted()
    }
}

impl Eq for Map {}

#[derive(Clone)]
pub struct Psbt {
    unsigned_tx: Transaction,
    global: Map,
    inputs: Vec<Map>,
    outputs: Vec<Map>,
}

impl Psbt {
    /// Parses binary PSBT bytes, or base64 text when the magic is absent.
    pub fn parse(data: &[u8]) -> Result<Self, ParseError> {
        if data.starts_with(MAGIC) {
            return Self::parse_binary(data);
        }
        let text = std::str::from_utf8(data).map_err(|_| ParseError::BadMagic)?;
        let text: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'+' | b'/' | b'=')) {
            return Err(ParseError::BadMagic);
        }
        let bytes = STANDARD.decode(text).map_err(|_| ParseError::BadEncoding)?;
        Self::parse_binary(&bytes)
    }

    pub fn from_base64(text: &str) -> Result<Self, ParseError> {
        let bytes = STANDARD.decode(text.trim()).map_err(|_| ParseError::BadEncoding)?;
        Self::parse_binary(&bytes)
    }

    pub fn parse_binary(data: &[u8]) -> Result<Self, ParseError> {
        let body = data.strip_prefix(MAGIC.as_slice()).ok_or(ParseError::BadMagic)?;
        let mut r = Reader::new(body);
        let global = Map::read(&mut r, Section::Global)?;
        let unsigned_tx = global_tx(&global)?;
        if let Some(v) = global.get_typed(global::VERSION) {
            let version = u32::from_le_bytes(v.try_into().expect("checked by key rules"));
            if version != 0 {
                return Err(ParseError::UnsupportedVersion(version));
            }
        }
        let inputs = (0..unsigned_tx.inputs.len())
            .map(|i| Map::read(&mut r, Section::Input(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = (0..unsigned_tx.outputs.len())
            .map(|i| Map::read(&mut r, Section::Output(i)))
            .collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        let psbt = Self { unsigned_tx, global, inputs, outputs };
        psbt.check_utxos()?;
        Ok(psbt)
    }

    /// A non-witness UTXO must be the transaction the input actually spends.
    fn check_utxos(&self) -> Result<(), ParseError> {
        for (i, map) in self.inputs.iter().enumerate() {
            if let Some(raw) = map.get_typed(input::NON_WITNESS_UTXO) {
                let prev = Transaction::decode(raw).expect("checked by key rules");
                if prev.txid() != self.unsigned_tx.inputs[i].previous_output.txid {
                    return Err(ParseError::InvalidValue {
                        section: Section::Input(i),
                        key_type: input::NON_WITNESS_UTXO,
                        reason: "utxo transaction does not match the spent outpoint",
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds an empty PSBT around a transaction skeleton.
    pub fn from_unsigned_tx(tx: Transaction) -> Result<Self, ParseError> {
        if tx.inputs.iter().any(|i| !i.script_sig.is_empty() || !i.witness.is_empty()) {
            return Err(ParseError::SignedTxInGlobal);
        }
        let mut global = Map::default();
        global.insert(vec![global::UNSIGNED_TX], tx.serialize_stripped());
        Ok(Self {
            inputs: vec![Map::default(); tx.inputs.len()],
            outputs: vec![Map::default(); tx.outputs.len()],
            unsigned_tx: tx,
            global,
        })
    }

    fn write(&self, sorted: bool) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        self.global.write(&mut out, sorted);
        for m in self.inputs.iter().chain(&self.outputs) {
            m.write(&mut out, sorted);
        }
        out
    }

    pub fn serialize(&self) -> Vec<u8> {
        self.write(false)
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.serialize())
    }

    /// Serialization with every map sorted by key. Equal PSBTs share it.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.write(true)
    }

    /// SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }

    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint())
    }

    pub fn unsigned_tx(&self) -> &Transaction {
        &self.unsigned_tx
    }

    pub fn unsigned_tx_bytes(&self) -> &[u8] {
        self.global.get_typed(global::UNSIGNED_TX).expect("present by construction")
    }

    pub fn global(&self) -> &Map {
        &self.global
    }

    pub fn inputs(&self) -> &[Map] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Map] {
        &self.outputs
    }

    pub fn input_mut(&mut self, index: usize) -> Option<&mut Map> {
        self.inputs.get_mut(index)
    }

    pub fn output_mut(&mut self, index: usize) -> Option<&mut Map> {
        self.outputs.get_mut(index)
    }

    pub fn same_transaction(&self, other: &Psbt) -> bool {
        self.unsigned_tx_bytes() == other.unsigned_tx_bytes()
    }

    /// Union of both PSBTs. Equal duplicates collapse; differing ones are an error.
    pub fn combine(&self, other: &Psbt) -> Result<Psbt, CombineError> {
        if !self.same_transaction(other) {
            return Err(CombineError::DifferentUnsignedTx);
        }
        let mut out = self.clone();
        out.global.merge(&other.global, Section::Global)?;
        for (i, (mine, theirs)) in out.inputs.iter_mut().zip(&other.inputs).enumerate() {
            mine.merge(theirs, Section::Input(i))?;
        }
        for (i, (mine, theirs)) in out.outputs.iter_mut().zip(&other.outputs).enumerate() {
            mine.merge(theirs, Section::Output(i))?;
        }
        Ok(out)
    }

    /// Partial signatures of one input as (pubkey, signature with sighash byte).
    pub fn partial_sigs(&self, index: usize) -> Vec<(&[u8], &[u8])> {
        self.inputs.get(index).map(|m| m.of_type(input::PARTIAL_SIG).collect()).unwrap_or_default()
    }

    /// The output an input spends, from either UTXO field.
    pub fn spent_output(&self, index: usize) -> Option<TxOut> {
        let map = self.inputs.get(index)?;
        if let Some(raw) = map.get_typed(input::WITNESS_UTXO) {
            return TxOut::decode(raw).ok();
        }
        let prev = Transaction::decode(map.get_typed(input::NON_WITNESS_UTXO)?).ok()?;
        let vout = self.unsigned_tx.inputs[index].previous_output.vout as usize;
        prev.outputs.get(vout).cloned()
    }
}

fn global_tx(global: &Map) -> Result<Transaction, ParseError> {
    let raw = global.get_typed(global::UNSIGNED_TX).ok_or(ParseError::MissingUnsignedTx)?;
    let tx = match Transaction::decode_legacy(raw) {
        Ok(tx) => tx,
        // A witness-serialized transaction is by definition not unsigned.
        Err(e) => match Transaction::decode(raw) {
            Ok(tx) if tx.has_witness() || raw.get(4) == Some(&0) => return Err(ParseError::SignedTxInGlobal),
            _ => return Err(ParseError::MalformedTx(e)),
        },
    };
    if tx.inputs.iter().any(|i| !i.script_sig.is_empty()) {
        return Err(ParseError::SignedTxInGlobal);
    }
    Ok(tx)
}

impl PartialEq for Psbt {
    fn eq(&self, other: &Self) -> bool {
        self.global == other.global && self.inputs == other.inputs && self.outputs == other.outputs
    }
}

impl Eq for Psbt {}

impl fmt::Debug for Psbt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Psbt")
            .field("txid", &self.unsigned_tx.txid())
            .field("inputs", &self.inputs.len())
            .field("outputs", &self.outputs.len())
            .field("fingerprint", &self.fingerprint_hex())
            .finish()
    }
}
