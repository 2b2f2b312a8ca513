//! Framed binary protocol between device and carrier.
//!
//! ```text
//! +---------+----------+----------------------+-----------------+
//! | version | msg type | payload length (BE)  | payload         |
//! | 1 byte  | 1 byte   | 4 bytes              | length bytes    |
//! +---------+----------+----------------------+-----------------+
//! ```
//!
//! Payload fields use the canonical encoding of [`crate::codec`].

use std::io::{self, Read, Write};

use crate::auth::{decode_session_id, AuthChallenge, AuthDecision, AuthResponseEntry, SessionId};
use crate::codec::{Canonical, Reader, Writer};
use crate::error::{DecodeError, DecodeErrorKind, ErrorCode};
use crate::profile::{EncryptedProfile, MAX_USER_ID_LEN};

pub const PROTOCOL_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
const MAX_ERROR_TEXT: usize = 64 * 1024;

pub mod msg_type {
    pub const STORE_PROFILE: u8 = 0x01;
    pub const STORE_ACK: u8 = 0x02;
    pub const AUTH_INIT: u8 = 0x03;
    pub const CHALLENGE: u8 = 0x04;
    pub const RESPONSE: u8 = 0x05;
    pub const RESULT: u8 = 0x06;
    pub const ERROR: u8 = 0x7F;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    StoreProfile { user_id: String, profile: EncryptedProfile },
    StoreAck,
    AuthInit { user_id: String, sample_size: u64 },
    Challenge(AuthChallenge),
    Response { session_id: SessionId, entries: Vec<AuthResponseEntry> },
    Result(AuthDecision),
    Error { code: ErrorCode, message: String },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::StoreProfile { .. } => msg_type::STORE_PROFILE,
            Message::StoreAck => msg_type::STORE_ACK,
            Message::AuthInit { .. } => msg_type::AUTH_INIT,
            Message::Challenge(_) => msg_type::CHALLENGE,
            Message::Response { .. } => msg_type::RESPONSE,
            Message::Result(_) => msg_type::RESULT,
            Message::Error { .. } => msg_type::ERROR,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::StoreProfile { .. } => "StoreProfile",
            Message::StoreAck => "StoreAck",
            Message::AuthInit { .. } => "AuthInit",
            Message::Challenge(_) => "Challenge",
            Message::Response { .. } => "Response",
            Message::Result(_) => "Result",
            Message::Error { .. } => "Error",
        }
    }

    fn encode_payload(&self, w: &mut Writer) {
        match self {
            Message::StoreProfile { user_id, profile } => {
                w.str(user_id);
                profile.encode(w);
            }
            Message::StoreAck => {}
            Message::AuthInit { user_id, sample_size } => {
                w.str(user_id);
                w.u64_uint(*sample_size);
            }
            Message::Challenge(c) => c.encode(w),
            Message::Response { session_id, entries } => {
                w.bytes(session_id);
                w.count(entries.len());
                for e in entries {
                    e.encode(w);
                }
            }
            Message::Result(d) => d.encode(w),
            Message::Error { code, message } => {
                w.u8(code.as_u8());
                w.str(message);
            }
        }
    }

    fn decode_payload(kind: u8, r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match kind {
            msg_type::STORE_PROFILE => {
                let user_id = r.str(MAX_USER_ID_LEN)?;
                let profile = EncryptedProfile::decode(r)?;
                Message::StoreProfile { user_id, profile }
            }
            msg_type::STORE_ACK => Message::StoreAck,
            msg_type::AUTH_INIT => {
                let user_id = r.str(MAX_USER_ID_LEN)?;
                let sample_size = r.u64_uint()?;
                Message::AuthInit { user_id, sample_size }
            }
            msg_type::CHALLENGE => Message::Challenge(AuthChallenge::decode(r)?),
            msg_type::RESPONSE => {
                let session_id = decode_session_id(r)?;
                let n = r.count(12)?;
                let entries = (0..n).map(|_| AuthResponseEntry::decode(r)).collect::<Result<_, _>>()?;
                Message::Response { session_id, entries }
            }
            msg_type::RESULT => Message::Result(AuthDecision::decode(r)?),
            msg_type::ERROR => {
                let code = ErrorCode::from_u8(r.u8()?);
                let message = r.str(MAX_ERROR_TEXT)?;
                Message::Error { code, message }
            }
            other => return Err(DecodeError { position: 1, kind: DecodeErrorKind::UnknownMessageType(other) }),
        })
    }
}

/// Serializes `msg` into one complete frame.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let mut payload = Writer::new();
    msg.encode_payload(&mut payload);
    let payload = payload.into_bytes();
    assert!(payload.len() <= MAX_PAYLOAD, "message exceeds the frame limit");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.push(PROTOCOL_VERSION);
    out.push(msg.msg_type());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Parses exactly one complete frame.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, DecodeError> {
    let (kind, len) = parse_header(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < len {
        return Err(DecodeError { position: bytes.len(), kind: DecodeErrorKind::Truncated });
    }
    if payload.len() > len {
        return Err(DecodeError { position: HEADER_LEN + len, kind: DecodeErrorKind::TrailingBytes(payload.len() - len) });
    }
    let mut r = Reader::with_offset(payload, HEADER_LEN);
    let msg = Message::decode_payload(kind, &mut r)?;
    r.finish()?;
    Ok(msg)
}

fn parse_header(bytes: &[u8]) -> Result<(u8, usize), DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError { position: bytes.len(), kind: DecodeErrorKind::Truncated });
    }
    if bytes[0] != PROTOCOL_VERSION {
        return Err(DecodeError { position: 0, kind: DecodeErrorKind::UnknownVersion(bytes[0]) });
    }
    let len = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(DecodeError { position: 2, kind: DecodeErrorKind::Oversize(len as u64) });
    }
    Ok((bytes[1], len))
}

/// Reads the raw bytes of one frame (header included) without interpreting
/// the version or type, so a malformed frame can be rejected without losing
/// stream synchronization. Returns `None` on a clean end of stream.
pub fn read_frame_bytes<R: Read>(reader: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes([header[2], header[3], header[4], header[5]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame payload of {len} bytes exceeds limit")));
    }
    let mut frame = Vec::with_capacity(HEADER_LEN + len);
    frame.extend_from_slice(&header);
    frame.resize(HEADER_LEN + len, 0);
    reader.read_exact(&mut frame[HEADER_LEN..])?;
    Ok(Some(frame))
}

pub fn write_message<W: Write>(writer: &mut W, msg: &Message) -> io::Result<()> {
    writer.write_all(&encode_frame(msg))?;
    writer.flush()
}

/// Reads and decodes one frame; end of stream is an error here.
pub fn read_message<R: Read>(reader: &mut R) -> crate::Result<Message> {
    let bytes = read_frame_bytes(reader)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
    Ok(decode_frame(&bytes)?)
}
