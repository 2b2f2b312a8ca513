//! Canonical byte encoding shared by persisted records and the wire protocol.
//!
//! Integers are encoded as a 4-byte big-endian length followed by the
//! big-endian magnitude with no leading zero bytes (zero is the empty
//! magnitude). Sequences carry a 4-byte big-endian element count. Strings and
//! opaque byte fields are length-prefixed the same way as integers.

use num_bigint::BigUint;

use crate::error::{DecodeError, DecodeErrorKind};

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u32(len_u32(v.len()));
        self.buf.extend_from_slice(v);
    }

    pub fn str(&mut self, v: &str) {
        self.bytes(v.as_bytes());
    }

    pub fn uint(&mut self, v: &BigUint) {
        if v.bits() == 0 {
            self.u32(0);
        } else {
            self.bytes(&v.to_bytes_be());
        }
    }

    pub fn u64_uint(&mut self, v: u64) {
        self.uint(&BigUint::from(v));
    }

    pub fn count(&mut self, n: usize) {
        self.u32(len_u32(n));
    }

    pub fn uints<'a>(&mut self, vs: impl ExactSizeIterator<Item = &'a BigUint>) {
        self.count(vs.len());
        for v in vs {
            self.uint(v);
        }
    }
}

fn len_u32(n: usize) -> u32 {
    u32::try_from(n).expect("field longer than 4 GiB")
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0, base: 0 }
    }

    /// A reader whose reported error positions are shifted by `base`.
    pub fn with_offset(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    pub fn position(&self) -> usize {
        self.base + self.pos
    }

    pub fn error(&self, kind: DecodeErrorKind) -> DecodeError {
        DecodeError { position: self.position(), kind }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(self.error(DecodeErrorKind::Truncated));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn str(&mut self, max: usize) -> Result<String, DecodeError> {
        let start = self.position();
        let raw = self.bytes()?;
        if raw.len() > max {
            return Err(DecodeError { position: start, kind: DecodeErrorKind::StringTooLong(raw.len()) });
        }
        String::from_utf8(raw.to_vec())
            .map_err(|_| DecodeError { position: start, kind: DecodeErrorKind::InvalidUtf8 })
    }

    pub fn uint(&mut self) -> Result<BigUint, DecodeError> {
        let start = self.position();
        let raw = self.bytes()?;
        if raw.first() == Some(&0) {
            return Err(DecodeError { position: start, kind: DecodeErrorKind::NonCanonicalInteger });
        }
        Ok(BigUint::from_bytes_be(raw))
    }

    pub fn u64_uint(&mut self) -> Result<u64, DecodeError> {
        let start = self.position();
        let v = self.uint()?;
        u64::try_from(&v)
            .map_err(|_| DecodeError { position: start, kind: DecodeErrorKind::InvalidValue("integer exceeds 64 bits") })
    }

    /// Reads an element count, rejecting counts that cannot possibly fit in
    /// the remaining input (every element takes at least `min_elem` bytes).
    pub fn count(&mut self, min_elem: usize) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem.max(1)) > self.buf.len() - self.pos {
            return Err(self.error(DecodeErrorKind::Truncated));
        }
        Ok(n)
    }

    pub fn uints(&mut self) -> Result<Vec<BigUint>, DecodeError> {
        let n = self.count(4)?;
        (0..n).map(|_| self.uint()).collect()
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        let rest = self.buf.len() - self.pos;
        if rest != 0 {
            return Err(self.error(DecodeErrorKind::TrailingBytes(rest)));
        }
        Ok(())
    }
}

/// Types with a canonical byte encoding.
pub trait Canonical: Sized {
    fn encode(&self, w: &mut Writer);
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}
