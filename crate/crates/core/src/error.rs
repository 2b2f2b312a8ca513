use std::fmt;

use thiserror::Error;

use crate::profile::Mode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("key size of {0} bits is below the 16-bit minimum")]
    KeySizeTooSmall(u64),
    #[error("no prime found after {0} candidates")]
    PrimeSearchExhausted(usize),
    #[error("injected primes are only accepted in insecure test mode")]
    InsecurePrimesRefused,
    #[error("invalid key material: {0}")]
    InvalidKey(&'static str),
    #[error("plaintext outside [0, n)")]
    PlaintextOutOfRange,
    #[error("randomizer is not a unit modulo n")]
    RandomizerNotUnit,
    #[error("malformed ciphertext")]
    MalformedCiphertext,

    #[error("feature value outside [1, 2^128]")]
    FeatureOutOfRange,
    #[error("feature set is empty")]
    EmptyFeatureSet,
    #[error("feature values are not pairwise distinct modulo n")]
    DuplicateFeature,
    #[error("numeric feature {index} is {value}, above the cap {cap}")]
    NumericAboveCap { index: usize, value: u64, cap: u64 },
    #[error("blinding scale must be nonzero (the trivial solution is excluded)")]
    TrivialBlinding,
    #[error("mode mismatch: expected {expected}, got {actual}")]
    ModeMismatch { expected: Mode, actual: Mode },

    #[error("session already consumed")]
    SessionConsumed,
    #[error("session expired")]
    SessionExpired,
    #[error("response is empty")]
    EmptyResponse,
    #[error("response entry {0} is not a unit modulo n^2")]
    InvalidEntry(usize),
    #[error("threshold must be positive")]
    InvalidThreshold,
    #[error("negative L1 distance ({0}): protocol corruption")]
    NegativeDistance(i128),
    #[error("similarity table has no row for a sample value")]
    SimilarityMissing,
    #[error("similarity weight {weight} outside [1, {max}]")]
    InvalidWeight { weight: u64, max: u64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("carrier replied with error {code}: {message}")]
    Remote { code: ErrorCode, message: String },
    #[error("unexpected message: expected {0}")]
    UnexpectedMessage(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Error codes carried by the wire `Error` message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    UnknownUser,
    Session,
    Decode,
    Protocol,
    Internal,
    Other(u8),
}

impl ErrorCode {
    pub fn as_u8(self) -> u8 {
        match self {
            ErrorCode::UnknownUser => 0x01,
            ErrorCode::Session => 0x02,
            ErrorCode::Decode => 0x03,
            ErrorCode::Protocol => 0x04,
            ErrorCode::Internal => 0x05,
            ErrorCode::Other(c) => c,
        }
    }

    pub fn from_u8(code: u8) -> Self {
        match code {
            0x01 => ErrorCode::UnknownUser,
            0x02 => ErrorCode::Session,
            0x03 => ErrorCode::Decode,
            0x04 => ErrorCode::Protocol,
            0x05 => ErrorCode::Internal,
            c => ErrorCode::Other(c),
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.as_u8())
    }
}

/// Failure to parse a canonical byte encoding. `position` is the byte offset
/// at which parsing stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("decode error at byte {position}: {kind}")]
pub struct DecodeError {
    pub position: usize,
    pub kind: DecodeErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeErrorKind {
    #[error("truncated input")]
    Truncated,
    #[error("non-canonical integer (leading zero byte)")]
    NonCanonicalInteger,
    #[error("unsupported frame version {0:#04x}")]
    UnknownVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownMessageType(u8),
    #[error("unknown tag {0:#04x}")]
    UnknownTag(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    Oversize(u64),
    #[error("payload length field disagrees with payload")]
    LengthMismatch,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 string")]
    InvalidUtf8,
    #[error("string of {0} bytes exceeds the limit")]
    StringTooLong(usize),
    #[error("invalid value: {0}")]
    InvalidValue(&'static str),
}
