use std::fmt;
use std::process::ExitCode;

use blindroom_client::SessionError;

pub const USAGE: u8 = 2;
pub const PROTOCOL: u8 = 3;
pub const NETWORK: u8 = 4;

/// A failure with the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: USAGE, message: message.into() }
    }

    pub fn protocol(message: impl Into<String>) -> Self {
        Self { code: PROTOCOL, message: message.into() }
    }

    pub fn network(message: impl Into<String>) -> Self {
        Self { code: NETWORK, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        let code = if e.is_network() { NETWORK } else { PROTOCOL };
        Self { code, message: e.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use blindroom_core::ErrorCode;

    #[test]
    fn session_errors_split_by_kind() {
        assert_eq!(CliError::from(SessionError::ConnectionLost).code, NETWORK);
        assert_eq!(CliError::from(SessionError::Timeout("quorum")).code, NETWORK);
        let locked = SessionError::Relay { code: ErrorCode::RoomLocked, detail: "room is locked".into() };
        assert_eq!(CliError::from(locked), CliError::protocol("room is locked"));
        assert_eq!(CliError::from(SessionError::TokenMissing).code, PROTOCOL);
    }
}
