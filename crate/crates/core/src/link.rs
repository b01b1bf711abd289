//! Room links: `<base>/room/<room id>#<base64url room key>`.
//!
//! User agents never send the fragment in a request, which is what keeps the
//! key away from the relay.

use std::fmt;

use crate::crypto::{BadKeyEncoding, RoomKey};
use crate::ids::RoomId;
use crate::redact::REDACTED_FRAGMENT;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("link has no key fragment")]
    MissingFragment,
    #[error("link has no /room/<id> path")]
    NotARoomLink,
    #[error("room id in link is not a canonical uuid")]
    BadUuid,
    #[error(transparent)]
    BadKeyEncoding(#[from] BadKeyEncoding),
}

#[derive(Clone, PartialEq, Eq)]
pub struct RoomLink {
    base: String,
    room_id: RoomId,
    key: RoomKey,
}

impl RoomLink {
    /// Builds a link. A trailing slash or fragment on `base` is dropped.
    pub fn new(base: &str, room_id: RoomId, key: RoomKey) -> Self {
        let base = base.split('#').next().unwrap_or_default().trim_end_matches('/');
        Self { base: base.to_owned(), room_id, key }
    }

    pub fn parse(text: &str) -> Result<Self, LinkError> {
        let text = text.trim();
        let (locator, fragment) = text.split_once('#').ok_or(LinkError::MissingFragment)?;
        if fragment.is_empty() {
            return Err(LinkError::MissingFragment);
        }
        let (base, rest) = locator.rsplit_once("/room/").ok_or(LinkError::NotARoomLink)?;
        let id_text = rest.split(['/', '?']).next().unwrap_or_default();
        let room_id = id_text.parse().map_err(|_| LinkError::BadUuid)?;
        let key = RoomKey::from_fragment(fragment)?;
        Ok(Self { base: base.to_owned(), room_id, key })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn room_id(&self) -> RoomId {
        self.room_id
    }

    pub fn key(&self) -> &RoomKey {
        &self.key
    }

    pub fn into_parts(self) -> (RoomId, RoomKey) {
        (self.room_id, self.key)
    }

    /// The locator part, which is all that may ever be requested from a server.
    pub fn locator(&self) -> String {
        format!("{}/room/{}", self.base, self.room_id)
    }

    /// Full link with the key replaced by a fixed marker.
    pub fn redacted(&self) -> String {
        format!("{}{}", self.locator(), REDACTED_FRAGMENT)
    }
}

impl fmt::Display for RoomLink {
    /// The full shareable link, key included. Show it once, then use [`RoomLink::redacted`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.locator(), self.key.to_fragment())
    }
}

impl fmt::Debug for RoomLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RoomLink({})", self.redacted())
    }
}

pub fn format_room_link(base: &str, id: RoomId, key: &RoomKey) -> String {
    RoomLink::new(base, id, key.clone()).to_string()
}

pub fn parse_room_link(text: &str) -> Result<(RoomId, RoomKey), LinkError> {
    RoomLink::parse(text).map(RoomLink::into_parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_shape() {
        let id = RoomId::generate();
        let key = RoomKey::generate();
        let link = format_room_link("https://signingroom.io", id, &key);
        assert_eq!(link, format!("https://signingroom.io/room/{id}#{}", key.to_fragment()));
        assert_eq!(link.matches('#').count(), 1);
        assert_eq!(link.split('#').nth(1).unwrap().len(), 43);
    }

    #[test]
    fn trailing_slash_on_base_is_dropped() {
        let id = RoomId::generate();
        let key = RoomKey::generate();
        assert_eq!(
            format_room_link("http://127.0.0.1:8080/", id, &key),
            format_room_link("http://127.0.0.1:8080", id, &key)
        );
    }

    #[test]
    fn parse_inverts_format() {
        let id = RoomId::generate();
        let key = RoomKey::generate();
        let (pid, pkey) = parse_room_link(&format_room_link("http://localhost:9", id, &key)).unwrap();
        assert_eq!(pid, id);
        assert_eq!(pkey, key);
    }

    #[test]
    fn parse_errors() {
        let id = RoomId::generate();
        let key = RoomKey::generate().to_fragment();
        assert_eq!(parse_room_link(&format!("https://x/room/{id}")), Err(LinkError::MissingFragment));
        assert_eq!(parse_room_link(&format!("https://x/room/{id}#")), Err(LinkError::MissingFragment));
        assert_eq!(parse_room_link(&format!("https://x/room/nope#{key}")), Err(LinkError::BadUuid));
        assert_eq!(parse_room_link(&format!("https://x/r/{id}#{key}")), Err(LinkError::NotARoomLink));
        assert_eq!(
            parse_room_link(&format!("https://x/room/{id}#{}", &key[..42])),
            Err(LinkError::BadKeyEncoding(BadKeyEncoding))
        );
    }

    #[test]
    fn redacted_and_debug_forms_hide_the_key() {
        let link = RoomLink::new("https://x", RoomId::generate(), RoomKey::generate());
        let frag = link.key().to_fragment();
        assert!(!link.redacted().contains(&frag));
        assert!(!format!("{link:?}").contains(&frag));
        assert!(link.redacted().ends_with("#<redacted>"));
        assert!(!link.locator().contains('#'));
    }
}
