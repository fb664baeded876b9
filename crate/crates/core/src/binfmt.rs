//! Little-endian byte encoding shared by the on-disk formats.
//!
//! Readers check every length field against the bytes actually present
//! before allocating, so a malformed header cannot trigger a large
//! allocation.

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum BinError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated input: needed {expected} bytes, file has {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{what} = {value} exceeds limit {limit}")]
    LimitExceeded {
        what: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("{extra} unexpected trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl fmt::Debug for ByteWriter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ByteWriter({} bytes)", self.buf.len())
    }
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn magic(&mut self, m: &[u8; 4]) -> &mut Self {
        self.buf.extend_from_slice(m);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f32(&mut self, v: f32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        for v in vs {
            self.f64(*v);
        }
        self
    }

    /// `u32` byte length followed by UTF-8 bytes.
    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Errors unless `n` more bytes are present.
    pub fn need(&self, n: usize) -> Result<(), BinError> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.buf.len() => Ok(()),
            _ => Err(BinError::Truncated {
                expected: self.pos.saturating_add(n),
                actual: self.buf.len(),
            }),
        }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], BinError> {
        self.need(n)?;
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<(), BinError> {
        let found = self.bytes(4).map_err(|_| BinError::BadMagic {
            expected: String::from_utf8_lossy(expected).into_owned(),
            found: String::from_utf8_lossy(self.buf).into_owned(),
        })?;
        if found != expected {
            return Err(BinError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u32) -> Result<u32, BinError> {
        let found = self.u32()?;
        if found != supported {
            return Err(BinError::UnsupportedVersion { found, supported });
        }
        Ok(found)
    }

    pub fn u8(&mut self) -> Result<u8, BinError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, BinError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, BinError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32, BinError> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, BinError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, BinError> {
        let raw = self.bytes(n.saturating_mul(8))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, BinError> {
        let raw = self.bytes(n.saturating_mul(4))?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn str(&mut self, what: &'static str, max_len: usize) -> Result<String, BinError> {
        let len = self.u32()? as usize;
        limit(what, len, max_len)?;
        let raw = self.bytes(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| BinError::InvalidUtf8(what))
    }

    pub fn finish(&self) -> Result<(), BinError> {
        match self.remaining() {
            0 => Ok(()),
            extra => Err(BinError::TrailingBytes { extra }),
        }
    }
}

pub fn limit(what: &'static str, value: usize, max: usize) -> Result<(), BinError> {
    if value > max {
        return Err(BinError::LimitExceeded {
            what,
            value: value as u64,
            limit: max as u64,
        });
    }
    Ok(())
}
