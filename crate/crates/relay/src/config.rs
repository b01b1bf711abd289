use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);
pub const DEFAULT_MAX_MEMBERS: usize = 20;
pub const DEFAULT_MAX_MESSAGE_BYTES: usize = 2 * 1024 * 1024;
pub const DEFAULT_MAX_ROOMS: usize = 10_000;
pub const DEFAULT_SWEEP_INTERVAL: Duration = Duration::from_secs(60);

const MIN_MESSAGE_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("room ttl must be positive")]
    ZeroTtl,
    #[error("max members must be at least 2, got {0}")]
    TooFewMembers(usize),
    #[error("max message bytes must be at least {MIN_MESSAGE_BYTES}, got {0}")]
    MessageLimitTooSmall(usize),
    #[error("room capacity must be positive")]
    ZeroCapacity,
}

#[derive(Debug, Clone)]
pub struct RelayConfig {
    pub listen_address: SocketAddr,
    /// Idle time after which a room is wiped.
    pub room_ttl: Duration,
    pub max_members_per_room: usize,
    /// Largest envelope accepted in a relay frame.
    pub max_message_bytes: usize,
    pub max_rooms: usize,
    pub static_asset_dir: Option<PathBuf>,
    pub sweep_interval: Duration,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            listen_address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            room_ttl: DEFAULT_TTL,
            max_members_per_room: DEFAULT_MAX_MEMBERS,
            max_message_bytes: DEFAULT_MAX_MESSAGE_BYTES,
            max_rooms: DEFAULT_MAX_ROOMS,
            static_asset_dir: None,
            sweep_interval: DEFAULT_SWEEP_INTERVAL,
        }
    }
}

impl RelayConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.room_ttl.is_zero() {
            return Err(ConfigError::ZeroTtl);
        }
        if self.max_members_per_room < 2 {
            return Err(ConfigError::TooFewMembers(self.max_members_per_room));
        }
        if self.max_message_bytes < MIN_MESSAGE_BYTES {
            return Err(ConfigError::MessageLimitTooSmall(self.max_message_bytes));
        }
        if self.max_rooms == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        Ok(())
    }

    /// Largest text frame that can carry a maximal envelope: base64 growth plus JSON framing.
    pub fn max_frame_bytes(&self) -> usize {
        self.max_message_bytes.div_ceil(3) * 4 + 1024
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RelayConfig::default();
        assert_eq!(c.validate(), Ok(()));
        assert_eq!(c.room_ttl.as_secs(), 86_400);
        assert_eq!(c.max_message_bytes, 2_097_152);
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = |f: fn(&mut RelayConfig)| {
            let mut c = RelayConfig::default();
            f(&mut c);
            c.validate().unwrap_err()
        };
        assert_eq!(bad(|c| c.room_ttl = Duration::ZERO), ConfigError::ZeroTtl);
        assert_eq!(bad(|c| c.max_members_per_room = 1), ConfigError::TooFewMembers(1));
        assert_eq!(bad(|c| c.max_message_bytes = 65_535), ConfigError::MessageLimitTooSmall(65_535));
    }
}
