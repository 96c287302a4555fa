//! Shared binary layout for checkpoints and cached tensors:
//!
//! ```text
//! magic[4] | u32 version | u32 header_len | header_len bytes of JSON | u64 count | count f64 values
//! ```
//!
//! Everything little-endian.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn encode<H: Serialize>(magic: [u8; 4], version: u32, header: &H, tensors: &[&[f64]]) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let count: usize = tensors.iter().map(|t| t.len()).sum();
    let mut buf = Vec::with_capacity(20 + header.len() + count * 8);
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&version.to_le_bytes());
    let len = u32::try_from(header.len()).map_err(|_| Error::invariant("header too large"))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(count as u64).to_le_bytes());
    for t in tensors {
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub(crate) fn decode<H: DeserializeOwned>(magic: [u8; 4], version: u32, bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    let truncated = |expected: usize| Error::TruncatedPayload {
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 12 {
        return Err(truncated(12));
    }
    let found: [u8; 4] = bytes[0..4].try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic { expected: magic, found });
    }
    let v = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if v != version {
        return Err(Error::VersionMismatch {
            expected: version,
            found: v,
        });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end + 8 {
        return Err(truncated(header_end + 8));
    }
    let header: H = serde_json::from_slice(&bytes[12..header_end])?;
    let count = u64::from_le_bytes(bytes[header_end..header_end + 8].try_into().unwrap()) as usize;
    let expected = header_end + 8 + count * 8;
    if bytes.len() != expected {
        return Err(truncated(expected));
    }
    let values = bytes[header_end + 8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub(crate) fn write<H: Serialize>(
    path: &Path,
    magic: [u8; 4],
    version: u32,
    header: &H,
    tensors: &[&[f64]],
) -> Result<()> {
    let bytes = encode(magic, version, header, tensors)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read<H: DeserializeOwned>(path: &Path, magic: [u8; 4], version: u32) -> Result<(H, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(magic, version, &bytes)
}

/// Splits a flat payload into consecutive chunks of the given lengths.
pub(crate) struct Cursor<'a> {
    values: &'a [f64],
    at: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(values: &'a [f64]) -> Self {
        Self { values, at: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [f64]> {
        let end = self.at + n;
        if end > self.values.len() {
            return Err(Error::Malformed(format!(
                "payload holds {} values, header declares at least {end}",
                self.values.len()
            )));
        }
        let out = &self.values[self.at..end];
        self.at = end;
        Ok(out)
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.at != self.values.len() {
            return Err(Error::Malformed(format!(
                "{} undeclared values after payload",
                self.values.len() - self.at
            )));
        }
        Ok(())
    }
}
