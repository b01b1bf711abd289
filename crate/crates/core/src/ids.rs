//! Random identifiers used to address rooms and connections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use uuid::Uuid;

/// Error returned when identifier text is not a canonical lowercase UUID.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a canonical lowercase hyphenated uuid: {0:?}")]
pub struct BadUuid(pub String);

fn parse_canonical(s: &str) -> Result<Uuid, BadUuid> {
    let id = Uuid::try_parse(s).map_err(|_| BadUuid(s.to_owned()))?;
    // Uuid accepts braces, urn and simple forms; only the 36-char lowercase form is canonical.
    if id.hyphenated().to_string() != s {
        return Err(BadUuid(s.to_owned()));
    }
    Ok(id)
}

macro_rules! uuid_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Uuid);

        impl $name {
            /// Draws a fresh random (version 4) identifier from the OS randomness source.
            pub fn generate() -> Self {
                Self(Uuid::new_v4())
            }

            pub fn from_uuid(id: Uuid) -> Self {
                Self(id)
            }

            pub fn as_uuid(&self) -> &Uuid {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0.hyphenated(), f)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0.hyphenated())
            }
        }

        impl FromStr for $name {
            type Err = BadUuid;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_canonical(s).map(Self)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

uuid_newtype!(
    /// Identifier of a room, shared in the path of the room link.
    RoomId
);

uuid_newtype!(
    /// Per-connection pseudonym minted by the relay. Carries no user identity.
    SessionId
);

/// Coordinator-side secret whose encryption under the room key becomes the admin token.
///
/// The plaintext never leaves the coordinator; only its envelope travels.
#[derive(Clone, PartialEq, Eq)]
pub struct AdminSecret(String);

impl AdminSecret {
    pub fn generate() -> Self {
        Self(Uuid::new_v4().hyphenated().to_string())
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let s = std::str::from_utf8(bytes).ok()?;
        parse_canonical(s).ok().map(|_| Self(s.to_owned()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Debug for AdminSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AdminSecret(<redacted>)")
    }
}
