//! Segment boundaries for AV clips and per-segment feature aggregation.
//!
//! Exactly one segmenter is active per experiment. Boundaries are computed
//! on one modality and applied unchanged to the other.

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BoundaryAnnotation, FrameFeatureSequence};

pub const DEFAULT_MIN_SEGMENT_FRAMES: usize = 2;

/// Novelty values at or below this are treated as flat signal.
const NOVELTY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmenterKind {
    Foote,
    Fixed,
    WholeClip,
    External(String),
}

impl fmt::Display for SegmenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmenterKind::Foote => f.write_str("foote"),
            SegmenterKind::Fixed => f.write_str("fixed"),
            SegmenterKind::WholeClip => f.write_str("whole_clip"),
            SegmenterKind::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for SegmenterKind {
    type Err = Error;

    /// Accepts `foote`, `fixed`, `whole_clip`, `external:<name>`, or a bare
    /// name which is taken as an external annotation set (`olda`, `sf`, ...).
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "foote" => SegmenterKind::Foote,
            "fixed" => SegmenterKind::Fixed,
            "whole_clip" | "whole" => SegmenterKind::WholeClip,
            "" => return Err(Error::Config("empty segmenter name".into())),
            other => SegmenterKind::External(other.strip_prefix("external:").unwrap_or(other).to_string()),
        })
    }
}

impl Serialize for SegmenterKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmenterKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered cut points of one clip. Segment `i` spans
/// `[starts[i], starts[i+1])` with `starts = [0, cuts..., num_frames]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundaries {
    pub clip_id: String,
    pub segmenter: SegmenterKind,
    pub num_frames: usize,
    pub cut_frames: Vec<usize>,
    /// Set when the segmenter could not run on this clip and fell back to a
    /// single segment.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

impl Boundaries {
    pub fn new(
        clip_id: impl Into<String>,
        segmenter: SegmenterKind,
        num_frames: usize,
        cut_frames: Vec<usize>,
        min_segment_frames: usize,
    ) -> Result<Self> {
        let b = Self {
            clip_id: clip_id.into(),
            segmenter,
            num_frames,
            cut_frames,
            fallback: false,
        };
        b.validate(min_segment_frames)?;
        Ok(b)
    }

    pub fn num_segments(&self) -> usize {
        self.cut_frames.len() + 1
    }

    /// Half-open frame ranges of every segment, in order.
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut edges = Vec::with_capacity(self.cut_frames.len() + 2);
        edges.push(0);
        edges.extend_from_slice(&self.cut_frames);
        edges.push(self.num_frames);
        edges.windows(2).map(|w| w[0]..w[1]).collect()
    }

    pub fn validate(&self, min_segment_frames: usize) -> Result<()> {
        if self.num_frames == 0 {
            return Err(Error::invariant("boundaries over an empty clip"));
        }
        let mut prev = 0;
        for &c in &self.cut_frames {
            if c <= prev || c >= self.num_frames {
                return Err(Error::invariant(format!(
                    "{}: cuts {:?} are not strictly increasing inside (0, {})",
                    self.clip_id, self.cut_frames, self.num_frames
                )));
            }
            prev = c;
        }
        if self.num_segments() > 1 {
            if let Some(short) = self.segments().iter().find(|r| r.len() < min_segment_frames) {
                return Err(Error::invariant(format!(
                    "{}: segment {short:?} shorter than {min_segment_frames} frames",
                    self.clip_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FooteParams {
    pub kernel_half_width: usize,
    /// Standard deviation of the Gaussian taper, as a fraction of the half width.
    pub gaussian_taper_std: f64,
    /// Peaks must exceed `peak_threshold * (mean + std)` of the novelty curve.
    pub peak_threshold: f64,
    pub min_segment_frames: usize,
}

impl Default for FooteParams {
    fn default() -> Self {
        Self {
            kernel_half_width: 8,
            gaussian_taper_std: 0.4,
            peak_threshold: 0.5,
            min_segment_frames: DEFAULT_MIN_SEGMENT_FRAMES,
        }
    }
}

/// Cosine self-similarity matrix of the frames. Zero frames have zero
/// similarity to everything, themselves included.
pub fn cosine_ssm(seq: &FrameFeatureSequence) -> Array2<f64> {
    let frames = seq.frames.mapv(f64::from);
    let norms: Vec<f64> = frames.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let gram = frames.dot(&frames.t());
    let n = frames.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = norms[i] * norms[j];
        if d > 0.0 {
            gram[[i, j]] / d
        } else {
            0.0
        }
    })
}

/// Foote novelty curve: `novelty[t]` scores a boundary just before frame `t`.
///
/// The Gaussian-tapered checkerboard kernel is centered between frames
/// `t-1` and `t`. Near the clip edges the kernel shrinks symmetrically to
/// the largest half width that fits, so a homogeneous stretch scores exactly
/// zero everywhere. Values are normalized by the kernel's absolute mass and
/// lie in `[-1, 1]`; positions where the kernel cannot reach
/// `min_half_width` are zero.
pub fn foote_novelty(ssm: &Array2<f64>, half_width: usize, taper_std: f64, min_half_width: usize) -> Vec<f64> {
    let n = ssm.nrows();
    let sigma = (taper_std * half_width as f64).max(f64::MIN_POSITIVE);
    // taper[u] weights offset u in 0..half_width away from the center line.
    let taper: Vec<f64> = (0..half_width)
        .map(|u| {
            let x = u as f64 + 0.5;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut novelty = vec![0.0; n];
    for (t, slot) in novelty.iter_mut().enumerate().skip(1) {
        let w = half_width.min(t).min(n - t);
        if w < min_half_width.max(1) {
            continue;
        }
        let mut acc = 0.0;
        let mut mass = 0.0;
        // i, j index frames t-w..t+w; offsets measured from the center line.
        for i in t - w..t + w {
            let (ui, si) = if i < t { (t - 1 - i, -1.0) } else { (i - t, 1.0) };
            for j in t - w..t + w {
                let (uj, sj) = if j < t { (t - 1 - j, -1.0) } else { (j - t, 1.0) };
                let g = taper[ui] * taper[uj];
                acc += si * sj * g * ssm[[i, j]];
                mass += g;
            }
        }
        *slot = acc / mass;
    }
    novelty
}

pub fn segment_foote(seq: &FrameFeatureSequence, params: &FooteParams) -> Result<Boundaries> {
    if params.kernel_half_width == 0 {
        return Err(Error::Config("kernel_half_width must be positive".into()));
    }
    let n = seq.num_frames();
    if n < 2 * params.kernel_half_width {
        warn!(
            "{}: {n} frames is shorter than the {}-frame Foote kernel; using one segment",
            seq.clip_id,
            2 * params.kernel_half_width
        );
        let mut b = whole_clip(seq);
        b.segmenter = SegmenterKind::Foote;
        b.fallback = true;
        return Ok(b);
    }
    let min_seg = params.min_segment_frames.max(1);
    let ssm = cosine_ssm(seq);
    let novelty = foote_novelty(&ssm, params.kernel_half_width, params.gaussian_taper_std, min_seg);

    let valid: Vec<f64> = novelty[1..].to_vec();
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let var = valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / valid.len() as f64;
    let threshold = params.peak_threshold * (mean + var.sqrt());

    let mut peaks: Vec<(usize, f64)> = (1..n)
        .filter(|&t| {
            let v = novelty[t];
            let left = novelty[t - 1];
            let right = if t + 1 < n { novelty[t + 1] } else { f64::NEG_INFINITY };
            v > left && v >= right && v > threshold && v > NOVELTY_FLOOR
        })
        .map(|t| (t, novelty[t]))
        .collect();
    // strongest first; earlier frame wins an exact tie
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut cuts: Vec<usize> = Vec::new();
    for (t, _) in peaks {
        let clear_edges = t >= min_seg && n - t >= min_seg;
        let clear_cuts = cuts.iter().all(|&c| c.abs_diff(t) >= min_seg);
        if clear_edges && clear_cuts {
            cuts.push(t);
        }
    }
    cuts.sort_unstable();
    Boundaries::new(seq.clip_id.clone(), SegmenterKind::Foote, n, cuts, min_seg)
}

/// Cuts every `length_frames`; a trailing remainder shorter than
/// `min_segment_frames` is merged into the previous segment.
pub fn segment_fixed(
    seq: &FrameFeatureSequence,
    length_frames: usize,
    min_segment_frames: usize,
) -> Result<Boundaries> {
    if length_frames == 0 || length_frames < min_segment_frames {
        return Err(Error::Config(format!(
            "fixed segment length {length_frames} is below the minimum {min_segment_frames}"
        )));
    }
    let n = seq.num_frames();
    let mut cuts: Vec<usize> = (1..).map(|i| i * length_frames).take_while(|&c| c < n).collect();
    if let Some(&last) = cuts.last() {
        if n - last < min_segment_frames {
            cuts.pop();
        }
    }
    Boundaries::new(seq.clip_id.clone(), SegmenterKind::Fixed, n, cuts, min_segment_frames)
}

pub fn whole_clip(seq: &FrameFeatureSequence) -> Boundaries {
    Boundaries {
        clip_id: seq.clip_id.clone(),
        segmenter: SegmenterKind::WholeClip,
        num_frames: seq.num_frames(),
        cut_frames: Vec::new(),
        fallback: false,
    }
}

/// Seconds to frame index, rounding to nearest with ties going down.
pub fn seconds_to_frame(t: f64, frame_rate_hz: f64) -> usize {
    (t * frame_rate_hz - 0.5).ceil().max(0.0) as usize
}

/// Converts externally produced boundary times into frame cuts.
///
/// Times are rounded to frames (ties down); cuts landing on the clip edges
/// are dropped, as is any cut closer than `min_segment_frames` to the
/// previously kept cut or to the clip end.
pub fn import_boundaries(
    annotation: &BoundaryAnnotation,
    seq: &FrameFeatureSequence,
    min_segment_frames: usize,
) -> Result<Boundaries> {
    if annotation.clip_id != seq.clip_id {
        return Err(Error::ClipMismatch {
            expected: seq.clip_id.clone(),
            found: annotation.clip_id.clone(),
        });
    }
    let duration = seq.duration_s();
    let n = seq.num_frames();
    for (i, w) in annotation.boundaries_s.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::NotAscending(i + 1));
        }
    }
    let mut cuts: Vec<usize> = Vec::with_capacity(annotation.boundaries_s.len());
    for &t in &annotation.boundaries_s {
        if !(t.is_finite() && t >= 0.0 && t <= duration) {
            return Err(Error::BoundaryRange(format!(
                "{}: boundary {t} s outside clip duration {duration} s",
                seq.clip_id
            )));
        }
        let f = seconds_to_frame(t, seq.frame_rate_hz);
        let prev = cuts.last().copied().unwrap_or(0);
        if f == 0 || f >= n || f - prev < min_segment_frames.max(1) {
            continue;
        }
        cuts.push(f);
    }
    while let Some(&last) = cuts.last() {
        if n - last < min_segment_frames {
            cuts.pop();
        } else {
            break;
        }
    }
    let segmenter = SegmenterKind::External(annotation.segmenter.clone());
    Boundaries::new(seq.clip_id.clone(), segmenter, n, cuts, min_segment_frames)
}

/// Per-segment mean inputs of both modalities for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedClip {
    pub clip_id: String,
    pub boundaries: Boundaries,
    /// `K x music_dim`
    pub music_inputs: Array2<f64>,
    /// `K x video_dim`
    pub video_inputs: Array2<f64>,
}

impl SegmentedClip {
    pub fn num_segments(&self) -> usize {
        self.boundaries.num_segments()
    }
}

fn segment_means(frames: &Array2<f32>, segments: &[std::ops::Range<usize>]) -> Array2<f64> {
    let mut out = Array2::zeros((segments.len(), frames.ncols()));
    for (row, r) in out.rows_mut().into_iter().zip(segments) {
        let mut row = row;
        for t in r.clone() {
            row.zip_mut_with(&frames.row(t), |acc, &v| *acc += f64::from(v));
        }
        row /= r.len() as f64;
    }
    out
}

/// Applies one set of boundaries to both modalities and averages each
/// segment. Sequences may differ by one frame; the longer is truncated.
pub fn aggregate(
    music: &FrameFeatureSequence,
    video: &FrameFeatureSequence,
    boundaries: &Boundaries,
) -> Result<SegmentedClip> {
    let (nm, nv) = (music.num_frames(), video.num_frames());
    if nm.abs_diff(nv) > 1 {
        return Err(Error::Shape(format!(
            "{}: music has {nm} frames but video has {nv}",
            music.clip_id
        )));
    }
    let n = nm.min(nv);
    let mut b = boundaries.clone();
    if b.cut_frames.iter().any(|&c| c >= n) {
        return Err(Error::BoundaryRange(format!(
            "{}: cut beyond the {n} shared frames",
            b.clip_id
        )));
    }
    b.num_frames = n;
    let segments = b.segments();
    let music_inputs = segment_means(&music.frames.slice(ndarray::s![..n, ..]).to_owned(), &segments);
    let video_inputs = segment_means(&video.frames.slice(ndarray::s![..n, ..]).to_owned(), &segments);
    debug_assert_eq!(music_inputs.len_of(Axis(0)), segments.len());
    Ok(SegmentedClip {
        clip_id: music.clip_id.clone(),
        boundaries: b,
        music_inputs,
        video_inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Modality;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blocks(vectors: &[Vec<f32>], len: usize) -> FrameFeatureSequence {
        let dim = vectors[0].len();
        let frames = Array2::from_shape_fn((vectors.len() * len, dim), |(t, d)| vectors[t / len][d]);
        FrameFeatureSequence::at_1hz("blk", Modality::Music, frames).unwrap()
    }

    fn basis(dim: usize, i: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn two_orthogonal_blocks_give_one_cut() {
        let seq = blocks(&[basis(4, 0), basis(4, 1)], 10);
        let b = segment_foote(&seq, &FooteParams::default()).unwrap();
        assert_eq!(b.cut_frames.len(), 1, "{b:?}");
        assert!(b.cut_frames[0].abs_diff(10) <= 2);
    }

    #[test]
    fn three_blocks_give_two_cuts() {
        let seq = blocks(&[basis(3, 0), basis(3, 1), basis(3, 2)], 15);
        let b = segment_foote(&seq, &FooteParams::default()).unwrap();
        assert_eq!(b.cut_frames.len(), 2, "{b:?}");
        assert!(b.cut_frames[0].abs_diff(15) <= 2);
        assert!(b.cut_frames[1].abs_diff(30) <= 2);
    }

    #[test]
    fn constant_signal_has_no_cuts() {
        let seq = blocks(&[vec![0.3, -1.2, 2.0]], 40);
        let b = segment_foote(&seq, &FooteParams::default()).unwrap();
        assert!(b.cut_frames.is_empty(), "{b:?}");
        assert!(!b.fallback);
    }

    #[test]
    fn short_sequence_falls_back_to_whole_clip() {
        let seq = blocks(&[basis(2, 0), basis(2, 1)], 5);
        let b = segment_foote(&seq, &FooteParams::default()).unwrap();
        assert!(b.fallback);
        assert_eq!(b.num_segments(), 1);
    }

    #[test]
    fn foote_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 6;
        let centers: Vec<Array1<f64>> = (0..4)
            .map(|_| Array1::from_shape_simple_fn(dim, || rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let frames = Array2::from_shape_fn((48, dim), |(t, d)| {
            (centers[t / 12][d] + 0.2 * rng.sample::<f64, _>(StandardNormal)) as f32
        });
        // random orthogonal matrix via Gram-Schmidt
        let mut q = Array2::<f64>::from_shape_simple_fn((dim, dim), || rng.sample(StandardNormal));
        for i in 0..dim {
            for j in 0..i {
                let proj = q.row(i).dot(&q.row(j));
                let rj = q.row(j).to_owned();
                q.row_mut(i).scaled_add(-proj, &rj);
            }
            let norm = q.row(i).dot(&q.row(i)).sqrt();
            q.row_mut(i).mapv_inplace(|v| v / norm);
        }
        let rotated = frames.mapv(f64::from).dot(&q).mapv(|v| v as f32);
        let a = FrameFeatureSequence::at_1hz("r", Modality::Music, frames).unwrap();
        let b = FrameFeatureSequence::at_1hz("r", Modality::Music, rotated).unwrap();
        let p = FooteParams::default();
        assert_eq!(
            segment_foote(&a, &p).unwrap().cut_frames,
            segment_foote(&b, &p).unwrap().cut_frames
        );
    }

    #[test]
    fn fixed_segmentation_examples() {
        let seq = |n| FrameFeatureSequence::at_1hz("f", Modality::Music, Array2::zeros((n, 1))).unwrap();
        assert_eq!(segment_fixed(&seq(10), 5, 2).unwrap().cut_frames, vec![5]);
        let b = segment_fixed(&seq(11), 5, 2).unwrap();
        assert_eq!(b.cut_frames, vec![5]);
        assert_eq!(b.segments().last().unwrap().len(), 6);
        assert!(segment_fixed(&seq(4), 5, 2).unwrap().cut_frames.is_empty());
        assert!(segment_fixed(&seq(4), 1, 2).is_err());
    }

    #[test]
    fn whole_clip_is_one_segment() {
        let seq = FrameFeatureSequence::at_1hz("w", Modality::Music, Array2::ones((7, 2))).unwrap();
        let b = whole_clip(&seq);
        assert_eq!(b.num_segments(), 1);
        assert_eq!(b.segments(), vec![0..7]);
    }

    fn annotation(times: &[f64]) -> BoundaryAnnotation {
        BoundaryAnnotation {
            clip_id: "a".into(),
            segmenter: "olda".into(),
            boundaries_s: times.to_vec(),
        }
    }

    #[test]
    fn import_examples() {
        let seq = FrameFeatureSequence::at_1hz("a", Modality::Music, Array2::zeros((60, 1))).unwrap();
        let b = import_boundaries(&annotation(&[20.0, 40.0]), &seq, 2).unwrap();
        assert_eq!(b.cut_frames, vec![20, 40]);
        assert_eq!(b.segmenter, SegmenterKind::External("olda".into()));
        assert_eq!(
            import_boundaries(&annotation(&[20.4, 20.6]), &seq, 2)
                .unwrap()
                .cut_frames,
            vec![20]
        );
        assert!(matches!(
            import_boundaries(&annotation(&[70.0]), &seq, 2),
            Err(Error::BoundaryRange(_))
        ));
        assert!(matches!(
            import_boundaries(&annotation(&[30.0, 10.0]), &seq, 2),
            Err(Error::NotAscending(1))
        ));
        let mut other = annotation(&[10.0]);
        other.clip_id = "zzz".into();
        assert!(matches!(
            import_boundaries(&other, &seq, 2),
            Err(Error::ClipMismatch { .. })
        ));
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(seconds_to_frame(20.5, 1.0), 20);
        assert_eq!(seconds_to_frame(20.51, 1.0), 21);
        assert_eq!(seconds_to_frame(20.49, 1.0), 20);
        assert_eq!(seconds_to_frame(0.0, 1.0), 0);
    }

    #[test]
    fn aggregate_two_frames() {
        let m = FrameFeatureSequence::at_1hz("x", Modality::Music, array![[0.0f32, 0.0], [2.0, 2.0]]).unwrap();
        let v = FrameFeatureSequence::at_1hz("x", Modality::Video, array![[1.0f32], [3.0]]).unwrap();
        let clip = aggregate(&m, &v, &whole_clip(&m)).unwrap();
        assert_eq!(clip.music_inputs, array![[1.0, 1.0]]);
        assert_eq!(clip.video_inputs, array![[2.0]]);
    }

    #[test]
    fn aggregate_truncates_one_extra_frame() {
        let m = FrameFeatureSequence::at_1hz("x", Modality::Music, Array2::ones((6, 2))).unwrap();
        let v = FrameFeatureSequence::at_1hz("x", Modality::Video, Array2::ones((5, 2))).unwrap();
        let b = Boundaries::new("x", SegmenterKind::Fixed, 6, vec![3], 2).unwrap();
        let clip = aggregate(&m, &v, &b).unwrap();
        assert_eq!(clip.boundaries.num_frames, 5);
        let far = Boundaries::new("x", SegmenterKind::Fixed, 6, vec![5], 1).unwrap();
        assert!(aggregate(&m, &v, &far).is_err());
        let v3 = FrameFeatureSequence::at_1hz("x", Modality::Video, Array2::ones((3, 2))).unwrap();
        assert!(aggregate(&m, &v3, &b).is_err());
    }

    #[test]
    fn aggregate_matches_independent_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames = Array2::from_shape_simple_fn((100, 128), || rng.random_range(-3.0f32..3.0));
        let m = FrameFeatureSequence::at_1hz("r", Modality::Music, frames.clone()).unwrap();
        let v = FrameFeatureSequence::at_1hz("r", Modality::Video, frames.clone()).unwrap();
        let mut cuts: Vec<usize> = (0..6).map(|_| rng.random_range(1..100)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let b = Boundaries::new("r", SegmenterKind::Fixed, 100, cuts.clone(), 1).unwrap();
        let clip = aggregate(&m, &v, &b).unwrap();

        let mut edges = vec![0];
        edges.extend(cuts);
        edges.push(100);
        for (k, w) in edges.windows(2).enumerate() {
            for d in 0..128 {
                let mut sum = 0.0f64;
                for t in w[0]..w[1] {
                    sum += frames[[t, d]] as f64;
                }
                let mean = sum / (w[1] - w[0]) as f64;
                assert!((clip.music_inputs[[k, d]] - mean).abs() <= 1e-12);
                assert!((clip.video_inputs[[k, d]] - mean).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn segments_partition_the_clip() {
        let b = Boundaries::new("p", SegmenterKind::Fixed, 20, vec![3, 9, 15], 2).unwrap();
        let covered: Vec<usize> = b.segments().into_iter().flatten().collect();
        assert_eq!(covered, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn segmenter_names_round_trip() {
        for s in ["foote", "fixed", "whole_clip", "external:olda"] {
            assert_eq!(s.parse::<SegmenterKind>().unwrap().to_string(), s);
        }
        assert_eq!(
            "olda".parse::<SegmenterKind>().unwrap(),
            SegmenterKind::External("olda".into())
        );
    }
}
