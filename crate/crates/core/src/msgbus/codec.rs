//! Little-endian byte codec shared by the bag format and message payloads.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at byte {0}")]
    Truncated(usize),
    #[error("invalid utf-8 string at byte {0}")]
    Utf8(usize),
    #[error("string too long for u16 length prefix ({0} bytes)")]
    StringTooLong(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

#[derive(Default, Debug, Clone)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
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

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn vec3(&mut self, v: glam::DVec3) -> &mut Self {
        self.f64(v.x).f64(v.y).f64(v.z)
    }

    /// Quaternion as `w, x, y, z`.
    pub fn quat(&mut self, q: glam::DQuat) -> &mut Self {
        self.f64(q.w).f64(q.x).f64(q.y).f64(q.z)
    }

    /// Strings longer than `u16::MAX` bytes are a caller bug; they are truncated
    /// at a char boundary so the stream stays parseable.
    pub fn str16(&mut self, s: &str) -> &mut Self {
        let mut end = s.len().min(u16::MAX as usize);
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        self.u16(end as u16);
        self.buf.extend_from_slice(&s.as_bytes()[..end]);
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn bytes32(&mut self, b: &[u8]) -> &mut Self {
        self.u32(b.len() as u32);
        self.bytes(b)
    }
}

#[derive(Debug, Clone)]
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        self.array().map(u16::from_le_bytes)
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        self.array().map(u64::from_le_bytes)
    }

    pub fn f64(&mut self) -> Result<f64, DecodeError> {
        self.array().map(f64::from_le_bytes)
    }

    pub fn vec3(&mut self) -> Result<glam::DVec3, DecodeError> {
        Ok(glam::DVec3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    pub fn quat(&mut self) -> Result<glam::DQuat, DecodeError> {
        let (w, x, y, z) = (self.f64()?, self.f64()?, self.f64()?, self.f64()?);
        Ok(glam::DQuat::from_xyzw(x, y, z, w))
    }

    pub fn str16(&mut self) -> Result<String, DecodeError> {
        let len = self.u16()? as usize;
        let at = self.pos;
        let raw = self.take(len)?;
        std::str::from_utf8(raw)
            .map(str::to_owned)
            .map_err(|_| DecodeError::Utf8(at))
    }

    pub fn bytes32(&mut self) -> Result<Vec<u8>, DecodeError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    pub fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

/// A payload type that travels on the bus under a fixed schema name.
pub trait Wire: Sized {
    const TYPE_TAG: &'static str;

    fn encode(&self, w: &mut ByteWriter);

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.encode(&mut w);
        w.into_inner()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        let v = Self::decode(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

/// Plain `f64` payloads, used for scalar actuator commands.
impl Wire for f64 {
    const TYPE_TAG: &'static str = "Float64";

    fn encode(&self, w: &mut ByteWriter) {
        w.f64(*self);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        r.f64()
    }
}

/// UTF-8 text payloads.
impl Wire for String {
    const TYPE_TAG: &'static str = "Text";

    fn encode(&self, w: &mut ByteWriter) {
        w.bytes(self.as_bytes());
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let at = r.position();
        String::from_utf8(r.rest().to_vec()).map_err(|_| DecodeError::Utf8(at))
    }
}
