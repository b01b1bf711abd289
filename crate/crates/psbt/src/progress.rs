//! Per-input signature tally against the multisig script's own m and n.

use crate::psbt::{input, Psbt};
use crate::script::{Multisig, MultisigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputProgress {
    /// Partial signatures from keys that appear in the script.
    pub have: usize,
    pub need: usize,
    pub total: usize,
    pub finalized: bool,
}

impl InputProgress {
    pub fn complete(&self) -> bool {
        self.have >= self.need
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureProgress {
    pub inputs: Vec<InputProgress>,
    pub overall_quorum: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgressError {
    #[error("input {0} has neither a witness script nor a redeem script")]
    NoScript(usize),
    #[error("input {input}: {source}")]
    NotMultisig { input: usize, source: MultisigError },
}

/// The script whose m and n govern an input: witness script, else redeem script.
pub fn signing_script(psbt: &Psbt, index: usize) -> Option<&[u8]> {
    let map = psbt.inputs().get(index)?;
    map.get_typed(input::WITNESS_SCRIPT).or_else(|| map.get_typed(input::REDEEM_SCRIPT))
}

fn finalized_script(psbt: &Psbt, index: usize) -> Option<Vec<u8>> {
    let raw = psbt.inputs()[index].get_typed(input::FINAL_SCRIPTWITNESS)?;
    let mut r = crate::encode::Reader::new(raw);
    crate::tx::read_witness(&mut r).ok()?.pop()
}

pub fn progress(psbt: &Psbt) -> Result<SignatureProgress, ProgressError> {
    let mut inputs = Vec::with_capacity(psbt.inputs().len());
    for index in 0..psbt.inputs().len() {
        let entry = match signing_script(psbt, index) {
            Some(script) => {
                let ms = Multisig::parse(script).map_err(|source| ProgressError::NotMultisig { input: index, source })?;
                let have = psbt.partial_sigs(index).iter().filter(|(pk, _)| ms.position(pk).is_some()).count();
                InputProgress { have, need: ms.threshold, total: ms.total(), finalized: false }
            }
            // Finalizing strips the scripts; the witness still ends with one.
            None => {
                let script = finalized_script(psbt, index).ok_or(ProgressError::NoScript(index))?;
                let ms = Multisig::parse(&script).map_err(|source| ProgressError::NotMultisig { input: index, source })?;
                InputProgress { have: ms.threshold, need: ms.threshold, total: ms.total(), finalized: true }
            }
        };
        inputs.push(entry);
    }
    let overall_quorum = inputs.iter().all(InputProgress::complete);
    Ok(SignatureProgress { inputs, overall_quorum })
}
