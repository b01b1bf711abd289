//! Partially signed Bitcoin transactions for m-of-n multisig ceremonies.
//!
//! Parses and serializes version 0 PSBTs losslessly, combines partial
//! signatures, tallies them against each input's CHECKMULTISIG script, and
//! finalizes P2WSH and P2SH-P2WSH inputs into a broadcastable transaction.
//! Signing is out of scope; signatures come from external wallets.

pub mod encode;
pub mod finalize;
mod keys;
pub mod progress;
pub mod psbt;
pub mod script;
pub mod sighash;
pub mod tx;

pub use finalize::{finalize, txid, FinalTx, FinalizeError};
pub use progress::{progress, InputProgress, ProgressError, SignatureProgress};
pub use psbt::{CombineError, Map, ParseError, Psbt, Section};
pub use tx::{Transaction, Txid};

pub fn parse_psbt(data: &[u8]) -> Result<Psbt, ParseError> {
    Psbt::parse(data)
}

pub fn combine(a: &Psbt, b: &Psbt) -> Result<Psbt, CombineError> {
    a.combine(b)
}
