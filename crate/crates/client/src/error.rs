use blindroom_core::{CryptoError, ErrorCode};
use blindroom_psbt::{CombineError, FinalizeError, ParseError, ProgressError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("relay unreachable: {0}")]
    RelayUnreachable(String),
    #[error("connection to the relay was lost")]
    ConnectionLost,
    #[error("{detail}")]
    Relay { code: ErrorCode, detail: String },
    #[error("admin token missing from the credential store")]
    TokenMissing,
    #[error("psbt describes a different transaction")]
    VersionConflict,
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Progress(#[from] ProgressError),
    #[error(transparent)]
    Finalize(#[from] FinalizeError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("credential store: {0}")]
    Credentials(String),
    #[error("broadcast endpoint rejected the transaction ({status}): {body}")]
    EndpointRejects { status: u16, body: String },
    #[error("broadcast endpoint returned txid {got}, expected {expected}")]
    TxidMismatch { expected: String, got: String },
    #[error("broadcast endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("receipt could not be written: {0}")]
    SinkWrite(String),
    #[error("no psbt received yet")]
    NoPsbt,
    #[error("session is closed")]
    Closed,
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
}

impl SessionError {
    /// True for failures of the network path rather than of the protocol or its cryptography.
    pub fn is_network(&self) -> bool {
        matches!(
            self,
            SessionError::RelayUnreachable(_)
                | SessionError::ConnectionLost
                | SessionError::EndpointUnreachable(_)
                | SessionError::Timeout(_)
        )
    }
}
