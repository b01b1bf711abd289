//! Transaction consensus encoding and TXIDs.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::encode::{write_compact_size, write_var_bytes, DecodeError, Reader};

pub fn sha256d(data: &[u8]) -> [u8; 32] {
    Sha256::digest(Sha256::digest(data)).into()
}

/// Transaction id, stored in digest byte order and displayed reversed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Txid([u8; 32]);

impl Txid {
    pub fn from_digest(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_digest(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rev = self.0;
        rev.reverse();
        f.write_str(&hex::encode(rev))
    }
}

impl fmt::Debug for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Txid({self})")
    }
}

impl FromStr for Txid {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes)?;
        bytes.reverse();
        Ok(Self(bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutPoint {
    pub txid: Txid,
    pub vout: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxIn {
    pub previous_output: OutPoint,
    pub script_sig: Vec<u8>,
    pub sequence: u32,
    pub witness: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOut {
    pub value: u64,
    pub script_pubkey: Vec<u8>,
}

impl TxOut {
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let out = read_txout(&mut r)?;
        r.finish()?;
        Ok(out)
    }

    pub fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.value.to_le_bytes());
        write_var_bytes(out, &self.script_pubkey);
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.script_pubkey.len());
        self.encode_to(&mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub version: i32,
    pub inputs: Vec<TxIn>,
    pub outputs: Vec<TxOut>,
    pub lock_time: u32,
}

fn read_txout(r: &mut Reader<'_>) -> Result<TxOut, DecodeError> {
    let value = r.u64()?;
    let script_pubkey = r.var_bytes()?.to_vec();
    Ok(TxOut { value, script_pubkey })
}

pub(crate) fn read_witness(r: &mut Reader<'_>) -> Result<Vec<Vec<u8>>, DecodeError> {
    let n = r.count(1)?;
    (0..n).map(|_| r.var_bytes().map(<[u8]>::to_vec)).collect()
}

pub(crate) fn write_witness(out: &mut Vec<u8>, items: &[Vec<u8>]) {
    write_compact_size(out, items.len() as u64);
    for item in items {
        write_var_bytes(out, item);
    }
}

impl Transaction {
    /// Decodes a transaction, accepting the segwit marker and flag.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        Self::decode_inner(bytes, true)
    }

    /// Decodes the legacy serialization only: a zero input count is taken literally.
    pub fn decode_legacy(bytes: &[u8]) -> Result<Self, DecodeError> {
        Self::decode_inner(bytes, false)
    }

    fn decode_inner(bytes: &[u8], allow_witness: bool) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let version = r.u32()? as i32;
        let mut segwit = false;
        if allow_witness && r.peek() == Some(0) {
            r.u8()?;
            if r.u8()? != 1 {
                return Err(DecodeError::MalformedVarint);
            }
            segwit = true;
        }
        let n_in = r.count(41)?;
        let mut inputs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            let txid = Txid(r.array()?);
            let vout = r.u32()?;
            let script_sig = r.var_bytes()?.to_vec();
            let sequence = r.u32()?;
            inputs.push(TxIn { previous_output: OutPoint { txid, vout }, script_sig, sequence, witness: Vec::new() });
        }
        let n_out = r.count(9)?;
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            outputs.push(read_txout(&mut r)?);
        }
        if segwit {
            for input in &mut inputs {
                input.witness = read_witness(&mut r)?;
            }
        }
        let lock_time = r.u32()?;
        r.finish()?;
        Ok(Self { version, inputs, outputs, lock_time })
    }

    pub fn has_witness(&self) -> bool {
        self.inputs.iter().any(|i| !i.witness.is_empty())
    }

    fn encode(&self, with_witness: bool) -> Vec<u8> {
        let segwit = with_witness && self.has_witness();
        let mut out = Vec::new();
        out.extend_from_slice(&self.version.to_le_bytes());
        if segwit {
            out.extend_from_slice(&[0, 1]);
        }
        write_compact_size(&mut out, self.inputs.len() as u64);
        for input in &self.inputs {
            out.extend_from_slice(input.previous_output.txid.as_digest());
            out.extend_from_slice(&input.previous_output.vout.to_le_bytes());
            write_var_bytes(&mut out, &input.script_sig);
            out.extend_from_slice(&input.sequence.to_le_bytes());
        }
        write_compact_size(&mut out, self.outputs.len() as u64);
        for output in &self.outputs {
            output.encode_to(&mut out);
        }
        if segwit {
            for input in &self.inputs {
                write_witness(&mut out, &input.witness);
            }
        }
        out.extend_from_slice(&self.lock_time.to_le_bytes());
        out
    }

    /// Full serialization, with witness data when any input carries some.
    pub fn serialize(&self) -> Vec<u8> {
        self.encode(true)
    }

    pub fn serialize_stripped(&self) -> Vec<u8> {
        self.encode(false)
    }

    pub fn txid(&self) -> Txid {
        Txid(sha256d(&self.serialize_stripped()))
    }

    /// Copy with every scriptSig and witness emptied.
    pub fn skeleton(&self) -> Self {
        let mut tx = self.clone();
        for input in &mut tx.inputs {
            input.script_sig.clear();
            input.witness.clear();
        }
        tx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Mainnet block 170: the first bitcoin transfer between two people.
    const TX_170: &str = "0100000001c997a5e56e104102fa209c6a852dd90660a20b2d9c352423edce25857fcd3704000000004847304402204e45e16932b8af514961a1d3a1a25fdf3f4f7732e9d624c6c61548ab5fb8cd410220181522ec8eca07de4860a4acdd12909d831cc56cbbac4622082221a8768d1d0901ffffffff0200ca9a3b00000000434104ae1a62fe09c5f51b13905f07f06b99a2f7159b2225f374cd378d71302fa28414e7aab37397f554a7df5f142c21c1b7303b8a0626f1baded5c72a704f7e6cd84cac00286bee0000000043410411db93e1dcdb8a016b49840f8c53bc1eb68a382e97b1482ecad7b148a6909a5cb2e0eaddfb84ccf9744464f82e160bfa9b8b64f9d4c03f999b8643f656b412a3ac00000000";
    const TXID_170: &str = "f4184fc596403b9d638783cf57adfe4c75c605f6356fbc91338530e9831e9e16";

    #[test]
    fn txid_of_known_transaction() {
        let tx = Transaction::decode(&hex::decode(TX_170).unwrap()).unwrap();
        assert_eq!(tx.txid().to_string(), TXID_170);
        assert_eq!(hex::encode(tx.serialize()), TX_170);
    }

    #[test]
    fn display_is_reversed_digest() {
        let tx = Transaction::decode(&hex::decode(TX_170).unwrap()).unwrap();
        let digest = sha256d(&tx.serialize_stripped());
        let mut rev = digest;
        rev.reverse();
        assert_eq!(tx.txid().to_string(), hex::encode(rev));
        assert_eq!(TXID_170.parse::<Txid>().unwrap(), tx.txid());
    }

    #[test]
    fn witness_does_not_change_txid() {
        let mut tx = Transaction::decode(&hex::decode(TX_170).unwrap()).unwrap().skeleton();
        let before = tx.txid();
        tx.inputs[0].witness = vec![vec![], vec![1, 2, 3]];
        assert_eq!(tx.txid(), before);
        let bytes = tx.serialize();
        assert_eq!(&bytes[4..6], &[0, 1]);
        assert_eq!(Transaction::decode(&bytes).unwrap(), tx);
    }

    #[test]
    fn malformed_transactions() {
        let bytes = hex::decode(TX_170).unwrap();
        assert_eq!(Transaction::decode(&bytes[..bytes.len() - 1]), Err(DecodeError::Truncated));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(Transaction::decode(&extra), Err(DecodeError::TrailingBytes(1)));
    }
}
