//! Run configuration, on-disk artifacts and the segment, embed and evaluate
//! steps shared by the command-line tool and the tests.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{self, Cursor};
use crate::embed::TwoBranchParams;
use crate::error::{Error, Result};
use crate::evaluation::Scenario;
use crate::features::{BoundaryAnnotation, ClipManifest, FrameFeatureSequence, Modality, SyntheticCatalog};
use crate::ranking::{AlignmentParams, Distance, EmbeddingSequence};
use crate::segmentation::{
    aggregate, import_boundaries, segment_fixed, segment_foote, whole_clip, Boundaries, FooteParams, SegmentedClip,
    SegmenterKind, DEFAULT_MIN_SEGMENT_FRAMES,
};
use crate::train::{EpochRecord, TrainConfig};

pub const SEGMENTS_MAGIC: [u8; 4] = *b"SVMG";
pub const EMBEDDINGS_MAGIC: [u8; 4] = *b"SVME";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub kind: SegmenterKind,
    /// Modality the boundaries are computed on (Foote and fixed); the other
    /// modality reuses them.
    pub source: Modality,
    pub foote: FooteParams,
    pub fixed_length_frames: usize,
    pub min_segment_frames: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            kind: SegmenterKind::Foote,
            source: Modality::Music,
            foote: FooteParams::default(),
            fixed_length_frames: 20,
            min_segment_frames: DEFAULT_MIN_SEGMENT_FRAMES,
        }
    }
}

impl SegmenterConfig {
    pub fn foote_params(&self) -> FooteParams {
        FooteParams {
            min_segment_frames: self.min_segment_frames,
            ..self.foote
        }
    }
}

/// Everything needed to replay a run. Serialized into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub segmenter: SegmenterConfig,
    pub train: TrainConfig,
    pub distances: Vec<Distance>,
    pub scenario: Scenario,
    pub alignment: AlignmentParams,
    /// Catalog size `N`; all test clips when unset.
    pub catalog_size: Option<usize>,
    pub seed: u64,
    /// When false, wall-clock fields are left out of every artifact so that
    /// repeated runs are byte-identical.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            output_dir: None,
            checkpoint: None,
            segmenter: SegmenterConfig::default(),
            train: TrainConfig::default(),
            distances: Distance::ALL.to_vec(),
            scenario: Scenario::Vanilla,
            alignment: AlignmentParams::default(),
            catalog_size: None,
            seed: 0,
            record_timing: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}

/// Boundaries for one clip under the configured segmenter.
pub fn segment_boundaries(
    music: &FrameFeatureSequence,
    video: &FrameFeatureSequence,
    cfg: &SegmenterConfig,
    annotation: Option<&BoundaryAnnotation>,
) -> Result<Boundaries> {
    let source = match cfg.source {
        Modality::Music => music,
        Modality::Video => video,
    };
    match &cfg.kind {
        SegmenterKind::Foote => segment_foote(source, &cfg.foote_params()),
        SegmenterKind::Fixed => segment_fixed(source, cfg.fixed_length_frames, cfg.min_segment_frames),
        SegmenterKind::WholeClip => Ok(whole_clip(source)),
        SegmenterKind::External(name) => {
            let ann = annotation.ok_or_else(|| Error::Config(format!("{}: no `{name}` annotation", music.clip_id)))?;
            if ann.segmenter != *name {
                return Err(Error::SegmenterMismatch {
                    trained: name.clone(),
                    requested: ann.segmenter.clone(),
                });
            }
            // Annotations are in seconds; either modality gives the same frames.
            import_boundaries(ann, source, cfg.min_segment_frames)
        }
    }
}

pub fn segment_pair(
    music: &FrameFeatureSequence,
    video: &FrameFeatureSequence,
    cfg: &SegmenterConfig,
    annotation: Option<&BoundaryAnnotation>,
) -> Result<SegmentedClip> {
    let b = segment_boundaries(music, video, cfg, annotation)?;
    aggregate(music, video, &b)
}

/// Per-clip results of segmenting a catalog; failures do not stop the rest.
#[derive(Debug, Default)]
pub struct SegmentRun {
    pub clips: Vec<SegmentedClip>,
    pub errors: Vec<(String, Error)>,
}

/// Segments every clip of a manifest in parallel, keeping manifest order.
pub fn segment_manifest(manifest: &ClipManifest, cfg: &SegmenterConfig) -> SegmentRun {
    let results: Vec<(String, Result<SegmentedClip>)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let r = (|| {
                let (music, video) = manifest.load_pair(entry)?;
                let ann = match &cfg.kind {
                    SegmenterKind::External(name) => {
                        let p = manifest
                            .annotation_path(entry, name)
                            .ok_or_else(|| Error::Config(format!("no `{name}` annotation listed")))?;
                        Some(BoundaryAnnotation::load(p)?)
                    }
                    _ => None,
                };
                segment_pair(&music, &video, cfg, ann.as_ref())
            })();
            (entry.clip_id.clone(), r)
        })
        .collect();
    let mut run = SegmentRun::default();
    for (id, r) in results {
        match r {
            Ok(c) => run.clips.push(c),
            Err(e) => run.errors.push((id, e)),
        }
    }
    run
}

/// Generates, segments and aggregates synthetic clips one at a time so the
/// frame-level features never have to be held for the whole range.
/// `External("truth")` uses the generator's exact cuts.
pub fn segment_synthetic(
    catalog: &SyntheticCatalog,
    range: Range<usize>,
    cfg: &SegmenterConfig,
) -> Result<Vec<SegmentedClip>> {
    range
        .into_par_iter()
        .map(|i| {
            let clip = catalog.clip(i);
            let b = match &cfg.kind {
                SegmenterKind::External(name) if name == crate::features::TRUTH_SEGMENTER => Boundaries::new(
                    clip.clip_id(),
                    cfg.kind.clone(),
                    clip.music.num_frames(),
                    clip.cut_frames.clone(),
                    1,
                )?,
                _ => segment_boundaries(&clip.music, &clip.video, cfg, None)?,
            };
            aggregate(&clip.music, &clip.video, &b)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentsHeader {
    segmenter: SegmenterKind,
    music_dim: usize,
    video_dim: usize,
    clips: Vec<Boundaries>,
    #[serde(default)]
    config: serde_json::Value,
}

/// Writes per-segment mean inputs of a segmented catalog.
pub fn save_segments(path: impl AsRef<Path>, clips: &[SegmentedClip], config: &serde_json::Value) -> Result<()> {
    let first = clips.first().ok_or(Error::CatalogTooSmall {
        needed: 1,
        available: 0,
    })?;
    let segmenter = first.boundaries.segmenter.clone();
    let (md, vd) = (first.music_inputs.ncols(), first.video_inputs.ncols());
    if let Some(bad) = clips.iter().find(|c| c.boundaries.segmenter != segmenter) {
        return Err(Error::SegmenterMismatch {
            trained: segmenter.to_string(),
            requested: bad.boundaries.segmenter.to_string(),
        });
    }
    let mut data = Vec::with_capacity(clips.len() * 2);
    for c in clips {
        if c.music_inputs.ncols() != md || c.video_inputs.ncols() != vd {
            return Err(Error::Shape(format!("{} has inconsistent feature dims", c.clip_id)));
        }
        data.push(c.music_inputs.as_slice().expect("standard layout"));
        data.push(c.video_inputs.as_slice().expect("standard layout"));
    }
    let header = SegmentsHeader {
        segmenter,
        music_dim: md,
        video_dim: vd,
        clips: clips.iter().map(|c| c.boundaries.clone()).collect(),
        config: config.clone(),
    };
    container::write(path.as_ref(), SEGMENTS_MAGIC, ARTIFACT_VERSION, &header, &data)
}

pub fn load_segments(path: impl AsRef<Path>) -> Result<(Vec<SegmentedClip>, serde_json::Value)> {
    let (header, values): (SegmentsHeader, Vec<f64>) =
        container::read(path.as_ref(), SEGMENTS_MAGIC, ARTIFACT_VERSION)?;
    let mut cursor = Cursor::new(&values);
    let mut clips = Vec::with_capacity(header.clips.len());
    for b in header.clips {
        let k = b.num_segments();
        let mut take = |dim: usize| -> Result<Array2<f64>> {
            Array2::from_shape_vec((k, dim), cursor.take(k * dim)?.to_vec())
                .map_err(|e| Error::Malformed(e.to_string()))
        };
        let music_inputs = take(header.music_dim)?;
        let video_inputs = take(header.video_dim)?;
        clips.push(SegmentedClip {
            clip_id: b.clip_id.clone(),
            boundaries: b,
            music_inputs,
            video_inputs,
        });
    }
    cursor.finish()?;
    Ok((clips, header.config))
}

/// Music and video embedding sequences of a catalog, in the same clip order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCatalog {
    pub segmenter: SegmenterKind,
    pub music: Vec<EmbeddingSequence>,
    pub video: Vec<EmbeddingSequence>,
}

impl EmbeddedCatalog {
    pub fn len(&self) -> usize {
        self.music.len()
    }

    pub fn is_empty(&self) -> bool {
        self.music.is_empty()
    }

    pub fn position(&self, clip_id: &str) -> Option<usize> {
        self.music.iter().position(|m| m.clip_id == clip_id)
    }
}

pub fn embed_clip(params: &TwoBranchParams, clip: &SegmentedClip) -> Result<(EmbeddingSequence, EmbeddingSequence)> {
    let seg = &clip.boundaries.segmenter;
    let m = params.embed(Modality::Music, clip.music_inputs.view())?;
    let v = params.embed(Modality::Video, clip.video_inputs.view())?;
    Ok((
        EmbeddingSequence::new(clip.clip_id.clone(), Modality::Music, seg.clone(), m)?,
        EmbeddingSequence::new(clip.clip_id.clone(), Modality::Video, seg.clone(), v)?,
    ))
}

/// Embeds every clip with an infer-mode forward pass.
pub fn embed_catalog(params: &TwoBranchParams, clips: &[SegmentedClip]) -> Result<EmbeddedCatalog> {
    let first = clips.first().ok_or(Error::CatalogTooSmall {
        needed: 1,
        available: 0,
    })?;
    let segmenter = first.boundaries.segmenter.clone();
    let pairs = clips
        .par_iter()
        .map(|c| {
            if c.boundaries.segmenter != segmenter {
                return Err(Error::SegmenterMismatch {
                    trained: segmenter.to_string(),
                    requested: c.boundaries.segmenter.to_string(),
                });
            }
            embed_clip(params, c)
        })
        .collect::<Result<Vec<_>>>()?;
    let (music, video) = pairs.into_iter().unzip();
    Ok(EmbeddedCatalog {
        segmenter,
        music,
        video,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingsHeader {
    segmenter: SegmenterKind,
    dim: usize,
    /// `(clip_id, K)` per clip; music rows then video rows.
    clips: Vec<(String, usize)>,
    #[serde(default)]
    config: serde_json::Value,
}

pub fn save_embeddings(path: impl AsRef<Path>, catalog: &EmbeddedCatalog, config: &serde_json::Value) -> Result<()> {
    let dim = catalog.music.first().map_or(0, |m| m.embeddings.ncols());
    let mut data = Vec::with_capacity(catalog.len() * 2);
    let mut clips = Vec::with_capacity(catalog.len());
    for (m, v) in catalog.music.iter().zip(&catalog.video) {
        if m.clip_id != v.clip_id || m.len() != v.len() || m.embeddings.ncols() != dim || v.embeddings.ncols() != dim {
            return Err(Error::Shape(format!(
                "{}: music and video embeddings disagree",
                m.clip_id
            )));
        }
        clips.push((m.clip_id.clone(), m.len()));
        data.push(m.embeddings.as_slice().expect("standard layout"));
        data.push(v.embeddings.as_slice().expect("standard layout"));
    }
    let header = EmbeddingsHeader {
        segmenter: catalog.segmenter.clone(),
        dim,
        clips,
        config: config.clone(),
    };
    container::write(path.as_ref(), EMBEDDINGS_MAGIC, ARTIFACT_VERSION, &header, &data)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(EmbeddedCatalog, serde_json::Value)> {
    let (header, values): (EmbeddingsHeader, Vec<f64>) =
        container::read(path.as_ref(), EMBEDDINGS_MAGIC, ARTIFACT_VERSION)?;
    let mut cursor = Cursor::new(&values);
    let mut music = Vec::with_capacity(header.clips.len());
    let mut video = Vec::with_capacity(header.clips.len());
    for (id, k) in &header.clips {
        for (out, modality) in [(&mut music, Modality::Music), (&mut video, Modality::Video)] {
            let rows = Array2::from_shape_vec((*k, header.dim), cursor.take(k * header.dim)?.to_vec())
                .map_err(|e| Error::Malformed(e.to_string()))?;
            out.push(EmbeddingSequence::new(
                id.clone(),
                modality,
                header.segmenter.clone(),
                rows,
            )?);
        }
    }
    cursor.finish()?;
    Ok((
        EmbeddedCatalog {
            segmenter: header.segmenter,
            music,
            video,
        },
        header.config,
    ))
}

/// JSON-lines training log, one record per epoch.
pub fn write_train_log(path: impl AsRef<Path>, records: &[EpochRecord], with_timing: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        let mut r = r.clone();
        if !with_timing {
            r.wall_s = None;
        }
        serde_json::to_writer(&mut out, &r)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Serializes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::NetSpec;
    use crate::features::{generate_synthetic_catalog, SyntheticSpec, TRUTH_SEGMENTER};

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            num_clips: 6,
            audio_dim: 6,
            video_dim: 10,
            latent_dim: 4,
            noise_std: 0.05,
            seed: 11,
            ..SyntheticSpec::default()
        }
    }

    fn small_net() -> TwoBranchParams {
        let mut net = NetSpec::default();
        net.music.input_dim = 6;
        net.music.layer_widths = vec![16, 8];
        net.video.input_dim = 10;
        net.video.layer_widths = vec![8];
        TwoBranchParams::init(net, 3).unwrap()
    }

    #[test]
    fn manifest_and_streaming_segmentation_agree() {
        let dir = tempfile::tempdir().unwrap();
        let cat = generate_synthetic_catalog(&spec()).unwrap();
        let (manifest, _) = cat.write_subset(dir.path(), 0..6).unwrap();
        for kind in [
            SegmenterKind::Foote,
            SegmenterKind::WholeClip,
            SegmenterKind::External(TRUTH_SEGMENTER.into()),
        ] {
            let cfg = SegmenterConfig {
                kind,
                ..SegmenterConfig::default()
            };
            let run = segment_manifest(&manifest, &cfg);
            assert!(run.errors.is_empty(), "{:?}", run.errors);
            let streamed = segment_synthetic(&cat, 0..6, &cfg).unwrap();
            assert_eq!(run.clips.len(), 6);
            for (a, b) in run.clips.iter().zip(&streamed) {
                assert_eq!(a.boundaries.cut_frames, b.boundaries.cut_frames);
                assert_eq!(a.music_inputs, b.music_inputs);
            }
        }
    }

    #[test]
    fn missing_annotations_are_reported_per_clip() {
        let dir = tempfile::tempdir().unwrap();
        let cat = generate_synthetic_catalog(&spec()).unwrap();
        let (manifest, _) = cat.write_subset(dir.path(), 0..3).unwrap();
        let cfg = SegmenterConfig {
            kind: SegmenterKind::External("olda".into()),
            ..SegmenterConfig::default()
        };
        let run = segment_manifest(&manifest, &cfg);
        assert_eq!(run.errors.len(), 3);
        assert!(run.clips.is_empty());
    }

    #[test]
    fn segments_and_embeddings_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cat = generate_synthetic_catalog(&spec()).unwrap();
        let clips = segment_synthetic(&cat, 0..4, &SegmenterConfig::default()).unwrap();
        let cfg = RunConfig::default().to_value();
        let p = dir.path().join("seg.bin");
        save_segments(&p, &clips, &cfg).unwrap();
        let (back, c) = load_segments(&p).unwrap();
        assert_eq!(back, clips);
        assert_eq!(c, cfg);

        let emb = embed_catalog(&small_net(), &clips).unwrap();
        let p = dir.path().join("emb.bin");
        save_embeddings(&p, &emb, &cfg).unwrap();
        let (back, _) = load_embeddings(&p).unwrap();
        assert_eq!(back, emb);
        for m in &back.music {
            for row in m.embeddings.rows() {
                assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn run_config_defaults_fill_missing_fields() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 5, "segmenter": {"kind": "whole_clip"}}"#).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.segmenter.kind, SegmenterKind::WholeClip);
        assert_eq!(c.train, TrainConfig::default());
        let back: RunConfig = serde_json::from_value(c.to_value()).unwrap();
        assert_eq!(back, c);
    }
}
