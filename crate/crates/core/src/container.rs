//! On-disk container shared by trained models.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `SCRIPTA\0`                         |
//! | 4     | model kind, ASCII (`SEGM` or `NORM`)      |
//! | 4     | format version (`u32`)                    |
//! | 8     | header length `h` (`u64`)                 |
//! | h     | header, UTF-8 JSON                        |
//! | 8     | payload length `p` (`u64`)                |
//! | p     | payload, kind specific                    |
//!
//! Trailing bytes after the payload are rejected.

use std::fmt;

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"SCRIPTA\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Segmenter,
    Normalizer,
}

impl ModelKind {
    pub fn tag(self) -> &'static [u8; 4] {
        match self {
            Self::Segmenter => b"SEGM",
            Self::Normalizer => b"NORM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(self.tag()).unwrap_or("????"))
    }
}

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("expected a {expected} model, found kind {found:?}")]
    WrongKind { expected: ModelKind, found: String },
    #[error("unsupported model format version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("model file is truncated or has trailing bytes")]
    Truncated,
    #[error("invalid model header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("invalid model payload: {0}")]
    Payload(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(kind: ModelKind, header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(kind.tag());
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        if self.buf.len() < n {
            return Err(ContainerError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Splits a container into `(header, payload)` after checking magic, kind and version.
pub fn decode(bytes: &[u8], expected: ModelKind) -> Result<(&[u8], &[u8]), ContainerError> {
    let mut cur = Cursor { buf: bytes };
    if cur.take(8).map_err(|_| ContainerError::BadMagic)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let kind = cur.take(4)?;
    if kind != expected.tag() {
        return Err(ContainerError::WrongKind {
            expected,
            found: String::from_utf8_lossy(kind).into_owned(),
        });
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ContainerError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let h = usize::try_from(cur.u64()?).map_err(|_| ContainerError::Truncated)?;
    let header = cur.take(h)?;
    let p = usize::try_from(cur.u64()?).map_err(|_| ContainerError::Truncated)?;
    let payload = cur.take(p)?;
    if !cur.buf.is_empty() {
        return Err(ContainerError::Truncated);
    }
    Ok((header, payload))
}
