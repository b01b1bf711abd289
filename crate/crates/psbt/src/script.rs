//! The slice of Bitcoin Script needed for bare CHECKMULTISIG and its
//! P2WSH / P2SH-P2WSH wrappers.

use ripemd::Ripemd160;
use sha2::{Digest, Sha256};

pub const OP_0: u8 = 0x00;
pub const OP_PUSHDATA1: u8 = 0x4c;
pub const OP_PUSHDATA2: u8 = 0x4d;
pub const OP_PUSHDATA4: u8 = 0x4e;
pub const OP_1: u8 = 0x51;
pub const OP_16: u8 = 0x60;
pub const OP_EQUAL: u8 = 0x87;
pub const OP_HASH160: u8 = 0xa9;
pub const OP_CHECKMULTISIG: u8 = 0xae;

/// Largest key count CHECKMULTISIG accepts.
pub const MAX_MULTISIG_KEYS: usize = 20;

pub fn hash160(data: &[u8]) -> [u8; 20] {
    <Ripemd160 as ripemd::Digest>::digest(Sha256::digest(data)).into()
}

pub fn push_data(out: &mut Vec<u8>, data: &[u8]) {
    match data.len() {
        n @ 0..=0x4b => out.push(n as u8),
        n @ 0x4c..=0xff => out.extend_from_slice(&[OP_PUSHDATA1, n as u8]),
        n @ 0x100..=0xffff => {
            out.push(OP_PUSHDATA2);
            out.extend_from_slice(&(n as u16).to_le_bytes());
        }
        n => {
            out.push(OP_PUSHDATA4);
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(data);
}

pub fn p2wsh_script_pubkey(witness_script: &[u8]) -> Vec<u8> {
    let mut out = vec![OP_0];
    push_data(&mut out, &Sha256::digest(witness_script));
    out
}

pub fn p2sh_script_pubkey(redeem_script: &[u8]) -> Vec<u8> {
    let mut out = vec![OP_HASH160];
    push_data(&mut out, &hash160(redeem_script));
    out.push(OP_EQUAL);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op<'a> {
    Push(&'a [u8]),
    Code(u8),
}

fn ops(script: &[u8]) -> Result<Vec<Op<'_>>, MultisigError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < script.len() {
        let op = script[i];
        i += 1;
        let len = match op {
            0x01..=0x4b => op as usize,
            OP_PUSHDATA1 => {
                let n = *script.get(i).ok_or(MultisigError::Truncated)? as usize;
                i += 1;
                n
            }
            OP_PUSHDATA2 => {
                let b = script.get(i..i + 2).ok_or(MultisigError::Truncated)?;
                i += 2;
                u16::from_le_bytes([b[0], b[1]]) as usize
            }
            OP_PUSHDATA4 => {
                let b = script.get(i..i + 4).ok_or(MultisigError::Truncated)?;
                i += 4;
                u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize
            }
            _ => {
                out.push(Op::Code(op));
                continue;
            }
        };
        let data = script.get(i..i + len).ok_or(MultisigError::Truncated)?;
        i += len;
        out.push(Op::Push(data));
    }
    Ok(out)
}

fn small_int(op: Op<'_>) -> Option<usize> {
    match op {
        Op::Code(c @ OP_1..=OP_16) => Some((c - OP_1 + 1) as usize),
        // 17..=20 only fit as a one-byte push.
        Op::Push([n]) if (17..=MAX_MULTISIG_KEYS as u8).contains(n) => Some(*n as usize),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MultisigError {
    #[error("script ends inside a push")]
    Truncated,
    #[error("script is not OP_m <pubkeys> OP_n OP_CHECKMULTISIG")]
    NotMultisig,
    #[error("key count {n} does not match {found} pushed keys")]
    CountMismatch { n: usize, found: usize },
    #[error("threshold {m} of {n} is out of range")]
    BadThreshold { m: usize, n: usize },
    #[error("pushed key of length {0} is not a public key")]
    BadKey(usize),
}

/// A parsed `OP_m <pubkey>... OP_n OP_CHECKMULTISIG` script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multisig {
    pub threshold: usize,
    pub pubkeys: Vec<Vec<u8>>,
}

impl Multisig {
    pub fn parse(script: &[u8]) -> Result<Self, MultisigError> {
        let ops = ops(script)?;
        let [first, middle @ .., n_op, Op::Code(OP_CHECKMULTISIG)] = ops.as_slice() else {
            return Err(MultisigError::NotMultisig);
        };
        let m = small_int(*first).ok_or(MultisigError::NotMultisig)?;
        let n = small_int(*n_op).ok_or(MultisigError::NotMultisig)?;
        let mut pubkeys = Vec::with_capacity(middle.len());
        for op in middle {
            match op {
                Op::Push(k) if matches!(k.len(), 33 | 65) => pubkeys.push(k.to_vec()),
                Op::Push(k) => return Err(MultisigError::BadKey(k.len())),
                Op::Code(_) => return Err(MultisigError::NotMultisig),
            }
        }
        if pubkeys.len() != n {
            return Err(MultisigError::CountMismatch { n, found: pubkeys.len() });
        }
        if m == 0 || m > n || n > MAX_MULTISIG_KEYS {
            return Err(MultisigError::BadThreshold { m, n });
        }
        Ok(Self { threshold: m, pubkeys })
    }

    pub fn total(&self) -> usize {
        self.pubkeys.len()
    }

    pub fn position(&self, pubkey: &[u8]) -> Option<usize> {
        self.pubkeys.iter().position(|k| k == pubkey)
    }

    pub fn to_script(&self) -> Vec<u8> {
        let mut out = Vec::new();
        push_small_int(&mut out, self.threshold);
        for k in &self.pubkeys {
            push_data(&mut out, k);
        }
        push_small_int(&mut out, self.pubkeys.len());
        out.push(OP_CHECKMULTISIG);
        out
    }
}

fn push_small_int(out: &mut Vec<u8>, n: usize) {
    if (1..=16).contains(&n) {
        out.push(OP_1 + n as u8 - 1);
    } else {
        out.extend_from_slice(&[1, n as u8]);
    }
}
