//! Frame-level feature sequences, their binary on-disk format, catalog
//! manifests, and the synthetic paired-clip generator.

mod fvec;
mod manifest;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fvec::{load_features, read_features, save_features, write_features, FVEC_MAGIC, FVEC_VERSION};
pub use manifest::{BoundaryAnnotation, ClipManifest, ManifestEntry};
pub use synthetic::{generate_synthetic_catalog, SyntheticCatalog, SyntheticClip, SyntheticSpec, TRUTH_SEGMENTER};

/// Default feature dimension of the music modality.
pub const MUSIC_DIM: usize = 128;
/// Default feature dimension of the video modality.
pub const VIDEO_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Music,
    Video,
}

impl Modality {
    pub fn code(self) -> u32 {
        match self {
            Modality::Music => 0,
            Modality::Video => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Modality::Music),
            1 => Ok(Modality::Video),
            other => Err(Error::Malformed(format!("unknown modality code {other}"))),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Music => "music",
            Modality::Video => "video",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "music" => Ok(Modality::Music),
            "video" => Ok(Modality::Video),
            other => Err(Error::Config(format!("unknown modality {other:?}"))),
        }
    }
}

/// Per-clip, per-modality matrix of frame features (one row per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSequence {
    pub clip_id: String,
    pub modality: Modality,
    pub frame_rate_hz: f64,
    /// `num_frames x dim`, row-major. Stored in single precision, matching the
    /// on-disk format so a save/load round trip is exact.
    pub frames: Array2<f32>,
}

impl FrameFeatureSequence {
    pub fn new(
        clip_id: impl Into<String>,
        modality: Modality,
        frame_rate_hz: f64,
        frames: Array2<f32>,
    ) -> Result<Self> {
        let seq = Self {
            clip_id: clip_id.into(),
            modality,
            frame_rate_hz,
            frames,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Sequence sampled at the default 1 Hz.
    pub fn at_1hz(clip_id: impl Into<String>, modality: Modality, frames: Array2<f32>) -> Result<Self> {
        Self::new(clip_id, modality, 1.0, frames)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f32> {
        self.frames.row(i)
    }

    /// Clip duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.num_frames() as f64 / self.frame_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::invariant("feature dim must be positive"));
        }
        if self.num_frames() == 0 {
            return Err(Error::invariant("sequence must contain at least one frame"));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::invariant(format!(
                "frame rate must be positive, got {}",
                self.frame_rate_hz
            )));
        }
        if let Some(index) = self.frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(())
    }
}
