//! Ranking distances between a video query's segment embeddings and a
//! music track's segment embeddings, and ranking of a whole catalog.
//!
//! Set distances (centroid, single and complete linkage) ignore segment
//! order; alignment distances (NW-DTW, SW-DTW, trace, best trace) use it.
//! Alignment scores are similarities and are negated so that every
//! distance ranks ascending.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Modality;
use crate::segmentation::SegmenterKind;

pub const NW_INDEL: f64 = 0.05;
pub const SW_INDEL: f64 = 0.01;

/// Ordered segment embeddings of one clip in one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    pub clip_id: String,
    pub modality: Modality,
    pub segmenter: SegmenterKind,
    /// `K x dim`, rows in temporal order.
    pub embeddings: Array2<f64>,
}

impl EmbeddingSequence {
    pub fn new(
        clip_id: impl Into<String>,
        modality: Modality,
        segmenter: SegmenterKind,
        embeddings: Array2<f64>,
    ) -> Result<Self> {
        if embeddings.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(Self {
            clip_id: clip_id.into(),
            modality,
            segmenter,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.nrows() == 0
    }

    /// Copy with the rows replaced, keeping identity and provenance.
    pub fn with_embeddings(&self, embeddings: Array2<f64>) -> Self {
        Self {
            embeddings,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Centroid,
    Single,
    Complete,
    NwDtw,
    SwDtw,
    Trace,
    BestTrace,
}

impl Distance {
    pub const ALL: [Distance; 7] = [
        Distance::Centroid,
        Distance::Single,
        Distance::Complete,
        Distance::NwDtw,
        Distance::SwDtw,
        Distance::Trace,
        Distance::BestTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distance::Centroid => "centroid",
            Distance::Single => "single",
            Distance::Complete => "complete",
            Distance::NwDtw => "nw_dtw",
            Distance::SwDtw => "sw_dtw",
            Distance::Trace => "trace",
            Distance::BestTrace => "best_trace",
        }
    }

    /// Ranking value `delta` for a music track against a query: lower is a
    /// better match.
    pub fn delta(self, music: &EmbeddingSequence, query: &EmbeddingSequence, params: &AlignmentParams) -> Result<f64> {
        let (m, q) = (&music.embeddings, &query.embeddings);
        match self {
            Distance::Centroid => dist_centroid(m, q),
            Distance::Single => dist_single(m, q),
            Distance::Complete => dist_complete(m, q),
            Distance::NwDtw => nw_dtw(m, q, params.nw_indel).map(|s| -s),
            Distance::SwDtw => sw_dtw(m, q, params.sw_indel).map(|s| -s),
            Distance::Trace => trace(m, q),
            Distance::BestTrace => best_trace(m, q),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Distance::ALL
            .into_iter()
            .find(|d| d.name() == s || (s == "btrace" && *d == Distance::BestTrace))
            .ok_or_else(|| Error::Config(format!("unknown distance {s:?}")))
    }
}

/// Insertion/deletion penalties of the two alignment distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentParams {
    pub nw_indel: f64,
    pub sw_indel: f64,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self {
            nw_indel: NW_INDEL,
            sw_indel: SW_INDEL,
        }
    }
}

fn non_empty(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "embedding dims differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(())
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise squared distances `D[i, j] = |m_i - q_j|^2`.
pub fn pairwise_sq_dist(music: &Array2<f64>, query: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((music.nrows(), query.nrows()), |(i, j)| {
        sq_dist(music.row(i), query.row(j))
    })
}

/// Squared distance between the two centroids.
pub fn dist_centroid(music: &Array2<f64>, query: &Array2<f64>) -> Result<f64> {
    non_empty(music, query)?;
    let cm: Array1<f64> = music.mean_axis(Axis(0)).expect("non-empty");
    let cq: Array1<f64> = query.mean_axis(Axis(0)).expect("non-empty");
    Ok(sq_dist(cm.view(), cq.view()))
}

/// Smallest pairwise squared distance.
pub fn dist_single(music: &Array2<f64>, query: &Array2<f64>) -> Result<f64> {
    non_empty(music, query)?;
    Ok(pairwise_sq_dist(music, query).fold(f64::INFINITY, |m, &v| m.min(v)))
}

/// Largest pairwise squared distance.
pub fn dist_complete(music: &Array2<f64>, query: &Array2<f64>) -> Result<f64> {
    non_empty(music, query)?;
    Ok(pairwise_sq_dist(music, query).fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
}

/// Global alignment score with linear indel penalty. `X` has a border row
/// and column at index 0 holding `-indel * index`; cell `(i, j)` (1-based
/// over segments) takes the best of a gap from above, a gap from the left,
/// or matching `m_i` with `q_j` (dot-product similarity). Returns the
/// bottom-right cell.
pub fn nw_dtw(music: &Array2<f64>, query: &Array2<f64>, indel: f64) -> Result<f64> {
    non_empty(music, query)?;
    let sim = music.dot(&query.t());
    let (km, kq) = sim.dim();
    let mut prev: Vec<f64> = (0..=kq).map(|j| -indel * j as f64).collect();
    let mut cur = vec![0.0; kq + 1];
    for i in 1..=km {
        cur[0] = -indel * i as f64;
        for j in 1..=kq {
            cur[j] = (prev[j] - indel)
                .max(cur[j - 1] - indel)
                .max(prev[j - 1] + sim[[i - 1, j - 1]]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[kq])
}

/// Local alignment score: zero borders, every cell floored at zero, and the
/// result is the largest cell anywhere in the matrix.
pub fn sw_dtw(music: &Array2<f64>, query: &Array2<f64>, indel: f64) -> Result<f64> {
    non_empty(music, query)?;
    let sim = music.dot(&query.t());
    let (km, kq) = sim.dim();
    let mut prev = vec![0.0; kq + 1];
    let mut cur = vec![0.0; kq + 1];
    let mut best = 0.0f64;
    for i in 1..=km {
        cur[0] = 0.0;
        for j in 1..=kq {
            let v = (prev[j] - indel)
                .max(cur[j - 1] - indel)
                .max(prev[j - 1] + sim[[i - 1, j - 1]])
                .max(0.0);
            cur[j] = v;
            best = best.max(v);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(best)
}

/// Sum of squared distances along the main diagonal, over the first
/// `min(K_m, K_q)` segments.
pub fn trace(music: &Array2<f64>, query: &Array2<f64>) -> Result<f64> {
    non_empty(music, query)?;
    let k = music.nrows().min(query.nrows());
    Ok((0..k).map(|i| sq_dist(music.row(i), query.row(i))).sum())
}

/// Smallest diagonal sum over every offset of the shorter sequence along
/// the longer one. Equals [`trace`] for equal lengths.
pub fn best_trace(music: &Array2<f64>, query: &Array2<f64>) -> Result<f64> {
    non_empty(music, query)?;
    let (short, long) = if music.nrows() <= query.nrows() {
        (music, query)
    } else {
        (query, music)
    };
    let k = short.nrows();
    Ok((0..=long.nrows() - k)
        .map(|off| (0..k).map(|i| sq_dist(short.row(i), long.row(i + off))).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub clip_id: String,
    pub delta: f64,
}

/// Catalog sorted by ascending `delta`, ties broken by clip id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub distance: Distance,
    pub segmenter: SegmenterKind,
    pub entries: Vec<RankedEntry>,
    pub wall_ms: f64,
}

impl RankedList {
    /// 1-based position of `clip_id`.
    pub fn rank_of(&self, clip_id: &str) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| e.clip_id == clip_id)
            .map(|p| p + 1)
            .ok_or_else(|| Error::MissingTarget(clip_id.to_string()))
    }

    pub fn to_output(&self, top_n: Option<usize>) -> RankedOutput {
        let n = top_n.unwrap_or(self.entries.len()).min(self.entries.len());
        RankedOutput {
            query_id: self.query_id.clone(),
            distance_name: self.distance.name().to_string(),
            segmenter: self.segmenter.to_string(),
            results: self.entries[..n]
                .iter()
                .enumerate()
                .map(|(i, e)| RankedResult {
                    clip_id: e.clip_id.clone(),
                    delta: e.delta,
                    rank: i + 1,
                })
                .collect(),
            wall_ms: Some(self.wall_ms),
            config: None,
        }
    }
}

/// Serialized ranked list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedOutput {
    pub query_id: String,
    pub distance_name: String,
    pub segmenter: String,
    pub results: Vec<RankedResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub clip_id: String,
    pub delta: f64,
    pub rank: usize,
}

/// Orders `(clip_id, delta)` pairs ascending by delta, then clip id.
pub fn sort_ranked(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| a.delta.total_cmp(&b.delta).then_with(|| a.clip_id.cmp(&b.clip_id)));
}

/// Scores every catalog track against the query in parallel and sorts the
/// result. The order does not depend on scan order.
pub fn rank_catalog(
    query: &EmbeddingSequence,
    catalog: &[EmbeddingSequence],
    distance: Distance,
    params: &AlignmentParams,
) -> Result<RankedList> {
    if catalog.is_empty() {
        return Err(Error::CatalogTooSmall {
            needed: 1,
            available: 0,
        });
    }
    if let Some(bad) = catalog.iter().find(|c| c.segmenter != query.segmenter) {
        return Err(Error::SegmenterMismatch {
            trained: query.segmenter.to_string(),
            requested: bad.segmenter.to_string(),
        });
    }
    let started = Instant::now();
    let mut entries = catalog
        .par_iter()
        .map(|track| {
            Ok(RankedEntry {
                clip_id: track.clip_id.clone(),
                delta: distance.delta(track, query, params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_ranked(&mut entries);
    Ok(RankedList {
        query_id: query.clip_id.clone(),
        distance,
        segmenter: query.segmenter.clone(),
        entries,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
