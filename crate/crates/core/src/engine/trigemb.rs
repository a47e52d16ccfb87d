//! `TRIGEMB` v1: per-sample embedding files.
//!
//! Little-endian layout:
//!
//! ```text
//! b"TRIG" | u32 version=1 | u32 rows | u32 cols | u32 l_text | u32 dim
//! | rows·cols·dim f32 (image, grid row-major, dim innermost)
//! | l_text·dim f32 (text)
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{EmbeddingSet, EngineError};
use crate::geometry::PatchGrid;

pub const MAGIC: &[u8; 4] = b"TRIG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 5 * 4;
pub const EXTENSION: &str = "trigemb";

#[derive(Debug, Error)]
pub enum TrigembError {
    #[error("bad magic bytes {0:?} (expected \"TRIG\")")]
    BadMagic([u8; 4]),
    #[error("unsupported TRIGEMB version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("invalid header: {0}")]
    Header(String),
    #[error(transparent)]
    Embeddings(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Header fields of a TRIGEMB payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrigembHeader {
    pub rows: u32,
    pub cols: u32,
    pub text_len: u32,
    pub dim: u32,
}

impl TrigembHeader {
    fn payload_floats(&self) -> Option<usize> {
        let patches = (self.rows as usize).checked_mul(self.cols as usize)?;
        let image = patches.checked_mul(self.dim as usize)?;
        let text = (self.text_len as usize).checked_mul(self.dim as usize)?;
        image.checked_add(text)
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_header(bytes: &[u8]) -> Result<TrigembHeader, TrigembError> {
    if bytes.len() < 4 {
        return Err(TrigembError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(TrigembError::BadMagic(magic));
    }
    if bytes.len() < 8 {
        return Err(TrigembError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(TrigembError::UnsupportedVersion(version));
    }
    if bytes.len() < HEADER_LEN {
        return Err(TrigembError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    Ok(TrigembHeader {
        rows: read_u32(bytes, 8),
        cols: read_u32(bytes, 12),
        text_len: read_u32(bytes, 16),
        dim: read_u32(bytes, 20),
    })
}

/// Decodes a payload; the image size is not stored in the file.
pub fn decode(bytes: &[u8], image_w: u32, image_h: u32) -> Result<EmbeddingSet, TrigembError> {
    let header = decode_header(bytes)?;
    if header.rows == 0 || header.cols == 0 || header.text_len == 0 || header.dim == 0 {
        return Err(TrigembError::Header(format!(
            "rows, cols, l_text and dim must be positive, got {header:?}"
        )));
    }
    let floats = header
        .payload_floats()
        .ok_or_else(|| TrigembError::Header(format!("payload size overflows: {header:?}")))?;
    let expected = HEADER_LEN + floats * 4;
    if bytes.len() < expected {
        return Err(TrigembError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(TrigembError::TrailingBytes(bytes.len() - expected));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let grid =
        PatchGrid::new(header.rows, header.cols, image_w, image_h).map_err(|e| TrigembError::Embeddings(e.into()))?;
    let split = grid.len() * header.dim as usize;
    let (image, text) = values.split_at(split);
    Ok(EmbeddingSet::new(
        grid,
        header.dim as usize,
        image.to_vec(),
        text.to_vec(),
    )?)
}

/// Encodes an embedding set; values are narrowed to `f32`.
pub fn encode(e: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + (e.image_values().len() + e.text_values().len()) * 4);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        e.grid().rows(),
        e.grid().cols(),
        e.text_len() as u32,
        e.dim() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in e.image_values().iter().chain(e.text_values()) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_file(path: impl AsRef<Path>, image_w: u32, image_h: u32) -> Result<EmbeddingSet, TrigembError> {
    decode(&fs::read(path)?, image_w, image_h)
}

pub fn write_file(path: impl AsRef<Path>, e: &EmbeddingSet) -> Result<(), TrigembError> {
    fs::write(path, encode(e))?;
    Ok(())
}
