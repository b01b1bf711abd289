//! Wire messages: one JSON object per WebSocket text frame, tagged by `type`.
//!
//! Envelope fields travel as standard padded base64. Unknown fields are
//! ignored on decode; an unknown `type` is an error.

use serde::{Deserialize, Serialize};

use crate::envelope::{base64_field, EncryptedEnvelope};
use crate::ids::{RoomId, SessionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdminAction {
    Lock,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotifyEvent {
    PeerJoined,
    PeerLeft,
    Locked,
    Closing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Never existed, closed or expired. Deliberately one code for all three.
    RoomNotFound,
    RoomLocked,
    RoomFull,
    RoomConflict,
    Capacity,
    Unauthorized,
    NotAMember,
    PayloadTooLarge,
    /// Frame could not be decoded or arrived out of order.
    Protocol,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::RoomNotFound => "room_not_found",
            ErrorCode::RoomLocked => "room_locked",
            ErrorCode::RoomFull => "room_full",
            ErrorCode::RoomConflict => "room_conflict",
            ErrorCode::Capacity => "capacity",
            ErrorCode::Unauthorized => "unauthorized",
            ErrorCode::NotAMember => "not_a_member",
            ErrorCode::PayloadTooLarge => "payload_too_large",
            ErrorCode::Protocol => "protocol",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    CreateRoom {
        room_id: RoomId,
        #[serde(with = "base64_field")]
        encrypted_admin_token: EncryptedEnvelope,
    },
    Join {
        room_id: RoomId,
    },
    Joined {
        session_id: SessionId,
        member_count: u32,
        locked: bool,
        /// Idle lifetime of the room, for client-side countdowns.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ttl_seconds: Option<u64>,
    },
    Relay {
        #[serde(with = "base64_field")]
        payload: EncryptedEnvelope,
    },
    Deliver {
        sender: SessionId,
        #[serde(with = "base64_field")]
        payload: EncryptedEnvelope,
    },
    Admin {
        action: AdminAction,
        #[serde(with = "base64_field")]
        presented_token: EncryptedEnvelope,
    },
    Notify {
        event: NotifyEvent,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session_id: Option<SessionId>,
    },
    Error {
        code: ErrorCode,
        #[serde(default)]
        detail: String,
    },
}

const KNOWN_TYPES: [&str; 8] = ["create_room", "join", "joined", "relay", "deliver", "admin", "notify", "error"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("frame is not a JSON object")]
    MalformedJson,
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
}

impl WireMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            WireMessage::CreateRoom { .. } => "create_room",
            WireMessage::Join { .. } => "join",
            WireMessage::Joined { .. } => "joined",
            WireMessage::Relay { .. } => "relay",
            WireMessage::Deliver { .. } => "deliver",
            WireMessage::Admin { .. } => "admin",
            WireMessage::Notify { .. } => "notify",
            WireMessage::Error { .. } => "error",
        }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        WireMessage::Error { code, detail: detail.into() }
    }
}

pub fn encode_wire(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages always serialize")
}

pub fn decode_wire(text: &str) -> Result<WireMessage, WireError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|_| WireError::MalformedJson)?;
    let obj = value.as_object().ok_or(WireError::MalformedJson)?;
    let ty = match obj.get("type") {
        None => return Err(WireError::MissingField("type".into())),
        Some(serde_json::Value::String(s)) => s.as_str(),
        Some(_) => return Err(WireError::InvalidField("type must be a string".into())),
    };
    if !KNOWN_TYPES.contains(&ty) {
        return Err(WireError::UnknownType(ty.to_owned()));
    }
    serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("missing field `").and_then(|rest| rest.split('`').next()) {
            Some(field) => WireError::MissingField(field.to_owned()),
            None => WireError::InvalidField(msg),
        }
    })
}
