//! FVEC: little-endian binary container for one frame feature sequence.
//!
//! ```text
//! "SVMF" | u32 version=1 | u32 modality | u32 dim | u32 num_frames | f32 frame_rate_hz
//! num_frames * dim f32 values, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{FrameFeatureSequence, Modality};
use crate::error::{Error, Result};

pub const FVEC_MAGIC: [u8; 4] = *b"SVMF";
pub const FVEC_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn save_features(seq: &FrameFeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN + seq.frames.len() * 4);
    write_features(seq, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>, clip_id: &str) -> Result<FrameFeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_features(&bytes[..], clip_id)
}

/// Serializes `seq` into any writer. Fails before writing if `seq` violates
/// its invariants.
pub fn write_features<W: Write>(seq: &FrameFeatureSequence, mut out: W) -> Result<()> {
    seq.validate()?;
    let io = |e| Error::io("<writer>", e);
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&FVEC_MAGIC);
    header[4..8].copy_from_slice(&FVEC_VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&seq.modality.code().to_le_bytes());
    header[12..16].copy_from_slice(&dim_u32(seq.dim())?.to_le_bytes());
    header[16..20].copy_from_slice(&dim_u32(seq.num_frames())?.to_le_bytes());
    header[20..24].copy_from_slice(&(seq.frame_rate_hz as f32).to_le_bytes());
    out.write_all(&header).map_err(io)?;
    let mut payload = Vec::with_capacity(seq.frames.len() * 4);
    for v in seq.frames.iter() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&payload).map_err(io)?;
    Ok(())
}

/// Parses an FVEC stream. The clip id is not stored in the file, so the
/// caller supplies it (usually from the manifest).
pub fn read_features<R: Read>(mut input: R, clip_id: &str) -> Result<FrameFeatureSequence> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io("<reader>", e))?;
    if bytes.len() < 4 {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if magic != FVEC_MAGIC {
        return Err(Error::BadMagic {
            expected: FVEC_MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FVEC_VERSION {
        return Err(Error::VersionMismatch {
            expected: FVEC_VERSION,
            found: version,
        });
    }
    let modality = Modality::from_code(word(8))?;
    let dim = word(12) as usize;
    let num_frames = word(16) as usize;
    let frame_rate_hz = f32::from_le_bytes(bytes[20..24].try_into().unwrap()) as f64;

    let values = num_frames
        .checked_mul(dim)
        .ok_or_else(|| Error::Malformed("frame count overflow".into()))?;
    let expected = HEADER_LEN + values * 4;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let frames = Array2::from_shape_vec((num_frames, dim), data).map_err(|e| Error::Malformed(e.to_string()))?;
    FrameFeatureSequence::new(clip_id, modality, frame_rate_hz, frames)
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invariant(format!("{n} does not fit in u32")))
}
