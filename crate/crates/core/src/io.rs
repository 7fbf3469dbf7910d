//! Little-endian binary framing shared by every on-disk format.
//!
//! Each file starts with a 4-byte magic followed by a format version byte.
//! Readers reject unknown magics and any version other than
//! [`FORMAT_VERSION`].

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const FORMAT_VERSION: u8 = 1;

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_magic(magic: &[u8; 4]) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u8(FORMAT_VERSION);
        w
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
    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic and version, leaving the cursor after the header.
    pub fn with_magic(buf: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if buf.len() < 5 || &buf[..4] != magic {
            return Err(Error::Format(format!(
                "expected magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        if buf[4] != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported {} version {} (this build reads version {})",
                String::from_utf8_lossy(magic),
                buf[4],
                FORMAT_VERSION
            )));
        }
        Ok(Reader { buf, pos: 5 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    /// Errors if trailing bytes remain.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Magic of a file on disk, if it has one of ours.
pub fn sniff_magic(path: &Path) -> Result<[u8; 4]> {
    let data = fs::read(path)?;
    if data.len() < 4 {
        return Err(Error::Format(format!("{} is too short", path.display())));
    }
    Ok([data[0], data[1], data[2], data[3]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_roundtrip_and_rejects() {
        let mut w = Writer::with_magic(b"TEST");
        w.u32(7).f64(1.5);
        let bytes = w.finish();
        let mut r = Reader::with_magic(&bytes, b"TEST").unwrap();
        assert_eq!(r.u32().unwrap(), 7);
        assert_eq!(r.f64().unwrap(), 1.5);
        r.finish().unwrap();

        assert!(Reader::with_magic(&bytes, b"NOPE").is_err());
        let mut future = bytes.clone();
        future[4] = 9;
        assert!(matches!(Reader::with_magic(&future, b"TEST"), Err(Error::Format(_))));
    }
}
