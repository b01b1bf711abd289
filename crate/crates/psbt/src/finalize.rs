//! Finalizer and extractor for CHECKMULTISIG inputs in P2WSH or P2SH-P2WSH.

use crate::progress::{progress, ProgressError};
use crate::psbt::{input, Psbt};
use crate::script::{p2sh_script_pubkey, p2wsh_script_pubkey, push_data, Multisig};
use crate::sighash::{segwit_v0_sighash, verify_ecdsa};
use crate::tx::{write_witness, Transaction, Txid};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FinalizeError {
    #[error(transparent)]
    Progress(#[from] ProgressError),
    #[error("input {input} has {have} of {need} signatures")]
    QuorumNotMet { input: usize, have: usize, need: usize },
    #[error("input {input}: {reason}")]
    UnsupportedScriptType { input: usize, reason: &'static str },
    #[error("input {0} carries no spent output")]
    MissingUtxo(usize),
    #[error("input {input}: signature from {pubkey} does not verify")]
    InvalidSignature { input: usize, pubkey: String },
}

/// A fully signed transaction ready for broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalTx {
    tx: Transaction,
    bytes: Vec<u8>,
    txid: Txid,
}

impl FinalTx {
    pub fn from_transaction(tx: Transaction) -> Self {
        let bytes = tx.serialize();
        let txid = tx.txid();
        Self { tx, bytes, txid }
    }

    pub fn transaction(&self) -> &Transaction {
        &self.tx
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn txid(&self) -> Txid {
        self.txid
    }
}

struct InputFinal {
    script_sig: Vec<u8>,
    witness: Vec<Vec<u8>>,
}

fn finalize_input(psbt: &Psbt, index: usize) -> Result<InputFinal, FinalizeError> {
    let map = &psbt.inputs()[index];
    let unsupported = |reason| FinalizeError::UnsupportedScriptType { input: index, reason };
    let witness_script = map.get_typed(input::WITNESS_SCRIPT).ok_or(unsupported("no witness script"))?;
    let spent = psbt.spent_output(index).ok_or(FinalizeError::MissingUtxo(index))?;
    let wsh = p2wsh_script_pubkey(witness_script);
    let script_sig = if spent.script_pubkey == wsh {
        Vec::new()
    } else {
        let redeem = map.get_typed(input::REDEEM_SCRIPT).ok_or(unsupported("not a P2WSH output"))?;
        if redeem != wsh.as_slice() || spent.script_pubkey != p2sh_script_pubkey(redeem) {
            return Err(unsupported("scripts do not match the spent output"));
        }
        let mut s = Vec::new();
        push_data(&mut s, redeem);
        s
    };

    let ms = Multisig::parse(witness_script).map_err(|_| unsupported("witness script is not CHECKMULTISIG"))?;
    let required_type = map.get_typed(input::SIGHASH_TYPE).map(|v| u32::from_le_bytes(v.try_into().expect("4 bytes")));
    let mut by_position: Vec<Option<Vec<u8>>> = vec![None; ms.total()];
    for (pubkey, sig) in psbt.partial_sigs(index) {
        let Some(pos) = ms.position(pubkey) else { continue };
        let invalid = || FinalizeError::InvalidSignature { input: index, pubkey: hex::encode(pubkey) };
        let (&hash_type, der) = sig.split_last().ok_or_else(invalid)?;
        if required_type.is_some_and(|t| t != hash_type as u32) {
            return Err(invalid());
        }
        let digest = segwit_v0_sighash(psbt.unsigned_tx(), index, witness_script, spent.value, hash_type as u32);
        if !verify_ecdsa(pubkey, der, &digest) {
            return Err(invalid());
        }
        by_position[pos] = Some(sig.to_vec());
    }
    // CHECKMULTISIG pops one extra item, and wants exactly m signatures in key order.
    let mut witness = vec![Vec::new()];
    witness.extend(by_position.into_iter().flatten().take(ms.threshold));
    if witness.len() - 1 < ms.threshold {
        return Err(FinalizeError::QuorumNotMet { input: index, have: witness.len() - 1, need: ms.threshold });
    }
    witness.push(witness_script.to_vec());
    Ok(InputFinal { script_sig, witness })
}

/// Verifies every counted signature, then builds the final transaction and
/// the finalized PSBT (per-input fields replaced by final script fields).
pub fn finalize(psbt: &Psbt) -> Result<(Psbt, FinalTx), FinalizeError> {
    let prog = progress(psbt)?;
    if let Some((index, p)) = prog.inputs.iter().enumerate().find(|(_, p)| !p.complete()) {
        return Err(FinalizeError::QuorumNotMet { input: index, have: p.have, need: p.need });
    }
    let mut finalized = psbt.clone();
    let mut tx = psbt.unsigned_tx().clone();
    for index in 0..psbt.inputs().len() {
        let map = finalized.input_mut(index).expect("index in range");
        if prog.inputs[index].finalized {
            let witness_raw = map.get_typed(input::FINAL_SCRIPTWITNESS).expect("finalized input");
            let mut r = crate::encode::Reader::new(witness_raw);
            tx.inputs[index].witness = crate::tx::read_witness(&mut r).expect("checked at parse");
            tx.inputs[index].script_sig = map.get_typed(input::FINAL_SCRIPTSIG).unwrap_or_default().to_vec();
            continue;
        }
        let fin = finalize_input(psbt, index)?;
        map.retain(|k, _| {
            let t = k[0];
            t == input::NON_WITNESS_UTXO || t == input::WITNESS_UTXO || t > input::TAP_MERKLE_ROOT
        });
        if !fin.script_sig.is_empty() {
            map.insert(vec![input::FINAL_SCRIPTSIG], fin.script_sig.clone());
        }
        let mut witness_raw = Vec::new();
        write_witness(&mut witness_raw, &fin.witness);
        map.insert(vec![input::FINAL_SCRIPTWITNESS], witness_raw);
        tx.inputs[index].script_sig = fin.script_sig;
        tx.inputs[index].witness = fin.witness;
    }
    Ok((finalized, FinalTx::from_transaction(tx)))
}

/// The transaction id of the PSBT's unsigned skeleton.
pub fn txid(psbt: &Psbt) -> Txid {
    psbt.unsigned_tx().txid()
}
