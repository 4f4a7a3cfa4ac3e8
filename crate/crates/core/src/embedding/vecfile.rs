//! `vectors.bin`: 8-byte magic `SPECVEC1`, dim (u32 LE), count (u32 LE), then
//! `count * dim` little-endian f32 values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPECVEC1";
pub const HEADER_LEN: usize = 16;

pub fn encode(dim: usize, data: &[f32]) -> Result<Vec<u8>> {
    let count = match dim {
        0 if data.is_empty() => 0,
        0 => return Err(Error::InvalidInput("non-empty vector data with dim 0".into())),
        d if !data.len().is_multiple_of(d) => {
            return Err(Error::InvalidInput(format!("{} floats do not form rows of dim {dim}", data.len())))
        }
        d => data.len() / d,
    };
    let to_u32 = |n: usize| u32::try_from(n).map_err(|_| Error::InvalidInput(format!("{n} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&to_u32(dim)?.to_le_bytes());
    out.extend_from_slice(&to_u32(count)?.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Returns `(dim, count, data)`.
pub fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Parse("vector file has no SPECVEC1 header".into()));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != dim * count * 4 {
        return Err(Error::Parse(format!(
            "vector file declares {count} x {dim} floats but holds {} bytes",
            payload.len()
        )));
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((dim, count, data))
}

pub fn write(path: &Path, dim: usize, data: &[f32]) -> Result<()> {
    fs::write(path, encode(dim, data)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
