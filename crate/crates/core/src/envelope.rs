//! Flat little-endian binary container shared by the PGA and classifier model
//! files.
//!
//! Layout: 8-byte magic `CTPHMODL`, a version byte, a kind byte, then the
//! payload as a sequence of `u64` and `f64` values. Vectors are written as a
//! `u64` length followed by their entries.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CTPHMODL";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum EnvelopeKind {
    Pga = 1,
    Classifier = 2,
}

impl EnvelopeKind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(EnvelopeKind::Pga),
            2 => Ok(EnvelopeKind::Classifier),
            _ => Err(Error::Format(format!("unknown model kind {b}"))),
        }
    }
}

pub struct EnvelopeWriter {
    buf: Vec<u8>,
}

impl EnvelopeWriter {
    pub fn new(kind: EnvelopeKind) -> Self {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(kind as u8);
        EnvelopeWriter { buf }
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    /// Writes to a temporary file next to `path`, then renames it into place.
    pub fn write_file(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.buf)
    }
}

pub struct EnvelopeReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> EnvelopeReader<'a> {
    pub fn new(bytes: &'a [u8], expected: EnvelopeKind) -> Result<Self> {
        if bytes.len() < 10 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        if bytes[8] != VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {}",
                bytes[8]
            )));
        }
        let kind = EnvelopeKind::from_byte(bytes[9])?;
        if kind != expected {
            return Err(Error::Format(format!(
                "expected a {expected:?} model, found {kind:?}"
            )));
        }
        Ok(EnvelopeReader { bytes, pos: 10 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("model file truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::Format("model file truncated".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes in model file",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Write-temp-then-rename so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut w = EnvelopeWriter::new(EnvelopeKind::Pga);
        w.u64(7).f64(-0.25).f64s(&[1.0, f64::INFINITY]);
        let bytes = w.into_bytes();
        assert_eq!(&bytes[..10], b"CTPHMODL\x01\x01");
        let mut r = EnvelopeReader::new(&bytes, EnvelopeKind::Pga).unwrap();
        assert_eq!(r.u64().unwrap(), 7);
        assert_eq!(r.f64().unwrap(), -0.25);
        assert_eq!(r.f64s().unwrap(), vec![1.0, f64::INFINITY]);
        r.finish().unwrap();
    }

    #[test]
    fn rejects_wrong_kind_and_truncation() {
        let mut w = EnvelopeWriter::new(EnvelopeKind::Classifier);
        w.f64s(&[1.0, 2.0]);
        let bytes = w.into_bytes();
        assert!(EnvelopeReader::new(&bytes, EnvelopeKind::Pga).is_err());
        let mut r =
            EnvelopeReader::new(&bytes[..bytes.len() - 1], EnvelopeKind::Classifier).unwrap();
        assert!(r.f64s().is_err());
        assert!(EnvelopeReader::new(b"garbage!!!", EnvelopeKind::Pga).is_err());
    }
}
