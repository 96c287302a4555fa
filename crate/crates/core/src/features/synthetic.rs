//! Synthetic paired AV clips with a known, learnable cross-modal association.
//!
//! Each clip is a run of segments. Segment `s` draws a latent vector `z_s`;
//! every music frame inside the segment is `A_m z_s + noise` and every video
//! frame is `A_v z_s + noise`, with `A_m`, `A_v` fixed random maps shared by
//! the whole catalog. Both modalities therefore share segment boundaries and
//! segment content, while a clip-level average blurs the per-segment detail.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{save_features, BoundaryAnnotation, ClipManifest, FrameFeatureSequence, ManifestEntry, Modality};
use crate::error::{Error, Result};

/// Segmenter name under which the generator's exact boundaries are written.
pub const TRUTH_SEGMENTER: &str = "truth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_clips: usize,
    /// Inclusive range of segment counts per clip.
    pub segments_per_clip: (usize, usize),
    /// Range of segment durations in seconds (sampled uniformly, rounded to frames).
    pub segment_duration_s: (f64, f64),
    pub audio_dim: usize,
    pub video_dim: usize,
    pub latent_dim: usize,
    pub noise_std: f64,
    /// Use identity maps instead of random ones. Requires
    /// `audio_dim == video_dim == latent_dim`.
    pub identity_maps: bool,
    /// When nonzero, segment latents are drawn from a catalog-wide set of
    /// this many prototype latents (never the same one twice in a row)
    /// instead of fresh Gaussians, so that different clips reuse the same
    /// segment contents in different orders.
    pub latent_vocabulary: usize,
    /// Standard deviation of the per-segment perturbation added to a
    /// prototype latent.
    pub vocabulary_jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_clips: 100,
            segments_per_clip: (3, 8),
            segment_duration_s: (6.0, 20.0),
            audio_dim: super::MUSIC_DIM,
            video_dim: super::VIDEO_DIM,
            latent_dim: 16,
            noise_std: 0.5,
            identity_maps: false,
            latent_vocabulary: 0,
            vocabulary_jitter: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (kmin, kmax) = self.segments_per_clip;
        if kmin == 0 || kmin > kmax {
            return Err(Error::invariant(format!("bad segment count range {kmin}..={kmax}")));
        }
        let (dmin, dmax) = self.segment_duration_s;
        if !(dmin.is_finite() && dmax.is_finite() && dmin > 0.0 && dmin <= dmax) {
            return Err(Error::invariant(format!("bad segment duration range {dmin}..{dmax}")));
        }
        if self.audio_dim == 0 || self.video_dim == 0 || self.latent_dim == 0 {
            return Err(Error::invariant("dimensions must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invariant("noise_std must be finite and non-negative"));
        }
        if self.identity_maps && !(self.audio_dim == self.video_dim && self.video_dim == self.latent_dim) {
            return Err(Error::invariant(
                "identity maps need audio_dim == video_dim == latent_dim",
            ));
        }
        if self.latent_vocabulary == 1 {
            return Err(Error::invariant("a latent vocabulary needs at least 2 entries"));
        }
        if !(self.vocabulary_jitter >= 0.0 && self.vocabulary_jitter.is_finite()) {
            return Err(Error::invariant("vocabulary_jitter must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One generated clip with its exact segment boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub music: FrameFeatureSequence,
    pub video: FrameFeatureSequence,
    /// Frame indices where a new segment starts, strictly inside `(0, num_frames)`.
    pub cut_frames: Vec<usize>,
}

impl SyntheticClip {
    pub fn clip_id(&self) -> &str {
        &self.music.clip_id
    }
}

/// A generator bound to one spec. Clips are produced on demand so a large
/// catalog never has to sit in memory at once; clip `i` depends only on the
/// seed and `i`.
#[derive(Debug, Clone)]
pub struct SyntheticCatalog {
    spec: SyntheticSpec,
    music_map: Array2<f64>,
    video_map: Array2<f64>,
    /// `latent_vocabulary x latent_dim`, empty when unused.
    vocabulary: Array2<f64>,
}

pub fn generate_synthetic_catalog(spec: &SyntheticSpec) -> Result<SyntheticCatalog> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (music_map, video_map) = if spec.identity_maps {
        (Array2::eye(spec.audio_dim), Array2::eye(spec.video_dim))
    } else {
        let scale = 1.0 / (spec.latent_dim as f64).sqrt();
        let mut draw = |rows: usize| {
            Array2::from_shape_simple_fn((rows, spec.latent_dim), || scale * rng.sample::<f64, _>(StandardNormal))
        };
        let m = draw(spec.audio_dim);
        let v = draw(spec.video_dim);
        (m, v)
    };
    let vocabulary = Array2::from_shape_simple_fn((spec.latent_vocabulary, spec.latent_dim), || {
        rng.sample::<f64, _>(StandardNormal)
    });
    Ok(SyntheticCatalog {
        spec: spec.clone(),
        music_map,
        video_map,
        vocabulary,
    })
}

impl SyntheticCatalog {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.num_clips
    }

    pub fn is_empty(&self) -> bool {
        self.spec.num_clips == 0
    }

    pub fn clip_id(index: usize) -> String {
        format!("clip{index:05}")
    }

    pub fn clip(&self, index: usize) -> SyntheticClip {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index as u64 + 1);

        let (kmin, kmax) = spec.segments_per_clip;
        let k = rng.random_range(kmin..=kmax);
        let (dmin, dmax) = spec.segment_duration_s;
        let lengths: Vec<usize> = (0..k)
            .map(|_| {
                let d = if dmin == dmax {
                    dmin
                } else {
                    rng.random_range(dmin..dmax)
                };
                (d.round() as usize).max(1)
            })
            .collect();
        let total: usize = lengths.iter().sum();

        let mut music = Array2::<f32>::zeros((total, spec.audio_dim));
        let mut video = Array2::<f32>::zeros((total, spec.video_dim));
        let mut cut_frames = Vec::with_capacity(k - 1);
        let mut start = 0;
        let mut prev: Option<usize> = None;
        for (s, &len) in lengths.iter().enumerate() {
            if s > 0 {
                cut_frames.push(start);
            }
            let z = match spec.latent_vocabulary {
                0 => Array1::from_shape_simple_fn(spec.latent_dim, || rng.sample::<f64, _>(StandardNormal)),
                v => {
                    let mut idx = rng.random_range(0..v - usize::from(prev.is_some()));
                    if prev.is_some_and(|p| idx >= p) {
                        idx += 1;
                    }
                    prev = Some(idx);
                    let jitter = spec.vocabulary_jitter;
                    self.vocabulary
                        .row(idx)
                        .mapv(|c| c + jitter * rng.sample::<f64, _>(StandardNormal))
                }
            };
            let m_mean = self.music_map.dot(&z);
            let v_mean = self.video_map.dot(&z);
            for t in start..start + len {
                for (d, &mu) in m_mean.iter().enumerate() {
                    music[[t, d]] = (mu + spec.noise_std * rng.sample::<f64, _>(StandardNormal)) as f32;
                }
                for (d, &mu) in v_mean.iter().enumerate() {
                    video[[t, d]] = (mu + spec.noise_std * rng.sample::<f64, _>(StandardNormal)) as f32;
                }
            }
            start += len;
        }
        let id = Self::clip_id(index);
        SyntheticClip {
            music: FrameFeatureSequence::at_1hz(id.clone(), Modality::Music, music)
                .expect("generator output is finite and non-empty"),
            video: FrameFeatureSequence::at_1hz(id, Modality::Video, video)
                .expect("generator output is finite and non-empty"),
            cut_frames,
        }
    }

    pub fn clips(&self, range: Range<usize>) -> impl Iterator<Item = SyntheticClip> + '_ {
        range.map(move |i| self.clip(i))
    }

    /// Writes clips `range` as FVEC files plus ground-truth boundary
    /// annotations under `dir`, and returns the manifest (paths relative to
    /// `dir`) together with the exact cut frames of every clip.
    pub fn write_subset(
        &self,
        dir: &Path,
        range: Range<usize>,
    ) -> Result<(ClipManifest, BTreeMap<String, Vec<usize>>)> {
        let feat_dir = dir.join("features");
        let truth_dir = dir.join(TRUTH_SEGMENTER);
        for d in [&feat_dir, &truth_dir] {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let mut entries = Vec::with_capacity(range.len());
        let mut truth = BTreeMap::new();
        for clip in self.clips(range) {
            let id = clip.clip_id().to_string();
            let music_rel = Path::new("features").join(format!("{id}.music.fvec"));
            let video_rel = Path::new("features").join(format!("{id}.video.fvec"));
            let truth_rel = Path::new(TRUTH_SEGMENTER).join(format!("{id}.json"));
            save_features(&clip.music, dir.join(&music_rel))?;
            save_features(&clip.video, dir.join(&video_rel))?;
            BoundaryAnnotation {
                clip_id: id.clone(),
                segmenter: TRUTH_SEGMENTER.into(),
                boundaries_s: clip
                    .cut_frames
                    .iter()
                    .map(|&f| f as f64 / clip.music.frame_rate_hz)
                    .collect(),
            }
            .save(dir.join(&truth_rel))?;
            let mut boundaries = BTreeMap::new();
            boundaries.insert(TRUTH_SEGMENTER.to_string(), truth_rel);
            entries.push(ManifestEntry {
                clip_id: id.clone(),
                music: music_rel,
                video: video_rel,
                boundaries,
            });
            truth.insert(id, clip.cut_frames);
        }
        Ok((ClipManifest::new(entries).with_base_dir(dir), truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            num_clips: 6,
            audio_dim: 5,
            video_dim: 7,
            latent_dim: 3,
            seed: 42,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn same_seed_same_clips() {
        let a = generate_synthetic_catalog(&small()).unwrap();
        let b = generate_synthetic_catalog(&small()).unwrap();
        for i in 0..6 {
            assert_eq!(a.clip(i), b.clip(i));
        }
        let mut other = small();
        other.seed = 43;
        let c = generate_synthetic_catalog(&other).unwrap();
        assert_ne!(a.clip(0), c.clip(0));
    }

    #[test]
    fn noiseless_identity_maps_give_identical_modalities() {
        let spec = SyntheticSpec {
            audio_dim: 4,
            video_dim: 4,
            latent_dim: 4,
            noise_std: 0.0,
            identity_maps: true,
            ..small()
        };
        let cat = generate_synthetic_catalog(&spec).unwrap();
        for clip in cat.clips(0..6) {
            assert_eq!(clip.music.frames, clip.video.frames);
            // constant within each segment
            let mut starts = vec![0];
            starts.extend(&clip.cut_frames);
            starts.push(clip.music.num_frames());
            for w in starts.windows(2) {
                for t in w[0]..w[1] {
                    assert_eq!(clip.music.frame(t), clip.music.frame(w[0]));
                }
            }
        }
    }

    #[test]
    fn segment_counts_match_bookkeeping() {
        let spec = SyntheticSpec {
            num_clips: 100,
            segments_per_clip: (3, 8),
            ..small()
        };
        let cat = generate_synthetic_catalog(&spec).unwrap();
        for clip in cat.clips(0..100) {
            let k = clip.cut_frames.len() + 1;
            assert!((3..=8).contains(&k), "K={k}");
            assert!(clip.cut_frames.windows(2).all(|w| w[0] < w[1]));
            assert!(clip.cut_frames.iter().all(|&c| c > 0 && c < clip.music.num_frames()));
            assert_eq!(clip.music.num_frames(), clip.video.num_frames());
        }
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            SyntheticSpec {
                segments_per_clip: (4, 3),
                ..small()
            },
            SyntheticSpec {
                segments_per_clip: (0, 3),
                ..small()
            },
            SyntheticSpec {
                noise_std: -1.0,
                ..small()
            },
            SyntheticSpec {
                audio_dim: 0,
                ..small()
            },
            SyntheticSpec {
                identity_maps: true,
                ..small()
            },
            SyntheticSpec {
                segment_duration_s: (5.0, 2.0),
                ..small()
            },
        ] {
            assert!(generate_synthetic_catalog(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn written_subset_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cat = generate_synthetic_catalog(&small()).unwrap();
        let (manifest, truth) = cat.write_subset(dir.path(), 2..5).unwrap();
        assert_eq!(manifest.len(), 3);
        assert!(manifest.validate().is_empty());
        let entry = &manifest.entries[0];
        assert_eq!(entry.clip_id, "clip00002");
        let (m, _) = manifest.load_pair(entry).unwrap();
        assert_eq!(m, cat.clip(2).music);
        let ann = BoundaryAnnotation::load(manifest.annotation_path(entry, TRUTH_SEGMENTER).unwrap()).unwrap();
        let frames: Vec<usize> = ann.boundaries_s.iter().map(|&t| t as usize).collect();
        assert_eq!(frames, truth["clip00002"]);
    }

    #[test]
    fn vocabulary_segments_reuse_prototypes_without_repeats() {
        let spec = SyntheticSpec {
            num_clips: 20,
            audio_dim: 4,
            video_dim: 4,
            latent_dim: 4,
            noise_std: 0.0,
            identity_maps: true,
            latent_vocabulary: 3,
            seed: 9,
            ..SyntheticSpec::default()
        };
        let cat = generate_synthetic_catalog(&spec).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for clip in cat.clips(0..20) {
            let starts: Vec<usize> = std::iter::once(0).chain(clip.cut_frames.iter().copied()).collect();
            let rows: Vec<Vec<u32>> = starts
                .iter()
                .map(|&t| clip.music.frames.row(t).iter().map(|v| v.to_bits()).collect())
                .collect();
            for w in rows.windows(2) {
                assert_ne!(w[0], w[1]);
            }
            seen.extend(rows);
        }
        assert_eq!(seen.len(), 3);
        let zero = SyntheticSpec {
            latent_vocabulary: 1,
            ..spec
        };
        assert!(zero.validate().is_err());
    }
}
