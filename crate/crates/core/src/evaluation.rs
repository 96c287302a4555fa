//! Retrieval scenarios, perturbations and metrics.
//!
//! Every test clip's video is used once as a query against the music of the
//! first `N` test clips; the true target is the music of the same clip.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{AlignmentParams, Distance, EmbeddingSequence};
use crate::segmentation::SegmenterKind;

/// Number of leading query segments dropped by the crop perturbation.
pub const CROP_SEGMENTS: usize = 2;

pub const CI_METHOD: &str = "normal approximation: 1.96 * sample std (n-1) / sqrt(n)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Vanilla,
    CropQuery,
    StretchTargets,
    CropStretch,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Vanilla,
        Scenario::CropQuery,
        Scenario::StretchTargets,
        Scenario::CropStretch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Vanilla => "vanilla",
            Scenario::CropQuery => "crop_query",
            Scenario::StretchTargets => "stretch_targets",
            Scenario::CropStretch => "crop_stretch",
        }
    }

    pub fn crops_query(self) -> bool {
        matches!(self, Scenario::CropQuery | Scenario::CropStretch)
    }

    pub fn stretches_targets(self) -> bool {
        matches!(self, Scenario::StretchTargets | Scenario::CropStretch)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '+'], "_");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Drops the first two segments. Returns `None` when fewer than three
/// segments exist; such queries are excluded from crop scenarios.
pub fn perturb_crop_query(seq: &EmbeddingSequence) -> Option<EmbeddingSequence> {
    if seq.len() <= CROP_SEGMENTS {
        return None;
    }
    let kept = seq.embeddings.slice(ndarray::s![CROP_SEGMENTS.., ..]).to_owned();
    Some(seq.with_embeddings(kept))
}

/// Repeats every segment once: `[a, b]` becomes `[a, a, b, b]`.
pub fn perturb_stretch_targets(seq: &EmbeddingSequence) -> EmbeddingSequence {
    let rows = seq.embeddings.nrows();
    let doubled = Array2::from_shape_fn((2 * rows, seq.embeddings.ncols()), |(i, j)| seq.embeddings[[i / 2, j]]);
    seq.with_embeddings(doubled)
}

/// Binary recall at `k` for a 1-based rank.
pub fn recall_from_rank(rank: usize, k: usize) -> bool {
    rank >= 1 && rank <= k
}

pub fn recall_at_k(ranked: &crate::ranking::RankedList, target: &str, k: usize) -> Result<bool> {
    Ok(recall_from_rank(ranked.rank_of(target)?, k))
}

/// Mean rank and 95% half-width of its confidence interval.
pub fn mean_rank_ci(ranks: &[usize]) -> (f64, f64) {
    let n = ranks.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = ranks.iter().map(|&r| r as f64).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = ranks.iter().map(|&r| (r as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub distance: String,
    pub segmenter: String,
    /// Catalog size.
    pub n: usize,
    pub n_queries: usize,
    pub excluded: usize,
    pub r_at_1: f64,
    pub r_at_10: f64,
    pub r_at_25: f64,
    pub mean_rank: f64,
    pub ci95: f64,
    pub chance_mean_rank: f64,
    pub ci_method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    /// Per-query ranks in query order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranks: Vec<usize>,
}

impl EvalReport {
    fn from_ranks(
        scenario: Scenario,
        distance: &str,
        segmenter: &SegmenterKind,
        n: usize,
        excluded: usize,
        ranks: Vec<usize>,
        wall_ms: f64,
    ) -> Self {
        let q = ranks.len().max(1) as f64;
        let pct = |k: usize| 100.0 * ranks.iter().filter(|&&r| recall_from_rank(r, k)).count() as f64 / q;
        let (mean_rank, ci95) = mean_rank_ci(&ranks);
        EvalReport {
            scenario,
            distance: distance.to_string(),
            segmenter: segmenter.to_string(),
            n,
            n_queries: ranks.len(),
            excluded,
            r_at_1: pct(1),
            r_at_10: pct(10),
            r_at_25: pct(25),
            mean_rank,
            ci95,
            chance_mean_rank: (n as f64 + 1.0) / 2.0,
            ci_method: CI_METHOD.to_string(),
            wall_ms: Some(wall_ms),
            config: None,
            ranks,
        }
    }

    /// Drops wall time so that reports of identical runs are byte-identical.
    pub fn without_timing(mut self) -> Self {
        self.wall_ms = None;
        self
    }
}

/// Position of `target` among `scores` under the ascending-delta,
/// clip-id tie-break order.
fn rank_of_target(scores: &[(f64, &str)], target: &str) -> Result<usize> {
    let &(t, _) = scores
        .iter()
        .find(|(_, id)| *id == target)
        .ok_or_else(|| Error::MissingTarget(target.to_string()))?;
    let before = scores
        .iter()
        .filter(|(d, id)| d.total_cmp(&t).then_with(|| id.cmp(&target)).is_lt())
        .count();
    Ok(before + 1)
}

/// Restricts `catalog` to its first `n` tracks and `queries` to those whose
/// pair is among them.
fn select<'a>(
    queries: &'a [EmbeddingSequence],
    catalog: &'a [EmbeddingSequence],
    n: Option<usize>,
) -> Result<(&'a [EmbeddingSequence], Vec<&'a EmbeddingSequence>)> {
    let n = n.unwrap_or(catalog.len());
    if n == 0 || n > catalog.len() {
        return Err(Error::CatalogTooSmall {
            needed: n,
            available: catalog.len(),
        });
    }
    let catalog = &catalog[..n];
    let ids: std::collections::HashSet<&str> = catalog.iter().map(|c| c.clip_id.as_str()).collect();
    let qs: Vec<&EmbeddingSequence> = queries.iter().filter(|q| ids.contains(q.clip_id.as_str())).collect();
    if qs.is_empty() {
        return Err(Error::Invariant("no query has its target in the catalog".into()));
    }
    Ok((catalog, qs))
}

/// Evaluates an arbitrary scoring function `score(target, query)`.
pub fn evaluate_with<F>(
    queries: &[EmbeddingSequence],
    catalog: &[EmbeddingSequence],
    n: Option<usize>,
    scenario: Scenario,
    name: &str,
    score: F,
) -> Result<EvalReport>
where
    F: Fn(&EmbeddingSequence, &EmbeddingSequence) -> Result<f64> + Sync,
{
    let started = Instant::now();
    let (catalog, queries) = select(queries, catalog, n)?;
    let segmenter = queries[0].segmenter.clone();
    if let Some(bad) = queries
        .iter()
        .copied()
        .chain(catalog.iter())
        .find(|s| s.segmenter != segmenter)
    {
        return Err(Error::SegmenterMismatch {
            trained: segmenter.to_string(),
            requested: bad.segmenter.to_string(),
        });
    }
    let targets: Vec<EmbeddingSequence> = if scenario.stretches_targets() {
        catalog.iter().map(perturb_stretch_targets).collect()
    } else {
        catalog.to_vec()
    };
    let per_query = queries
        .par_iter()
        .map(|q| {
            let query = if scenario.crops_query() {
                match perturb_crop_query(q) {
                    Some(c) => c,
                    None => return Ok(None),
                }
            } else {
                (*q).clone()
            };
            let scores = targets
                .iter()
                .map(|t| Ok((score(t, &query)?, t.clip_id.as_str())))
                .collect::<Result<Vec<_>>>()?;
            rank_of_target(&scores, &q.clip_id).map(Some)
        })
        .collect::<Result<Vec<Option<usize>>>>()?;
    let excluded = per_query.iter().filter(|r| r.is_none()).count();
    let ranks: Vec<usize> = per_query.into_iter().flatten().collect();
    Ok(EvalReport::from_ranks(
        scenario,
        name,
        &segmenter,
        catalog.len(),
        excluded,
        ranks,
        started.elapsed().as_secs_f64() * 1e3,
    ))
}

/// One report per distance for the given scenario.
pub fn run_eval(
    queries: &[EmbeddingSequence],
    catalog: &[EmbeddingSequence],
    n: Option<usize>,
    scenario: Scenario,
    distances: &[Distance],
    params: &AlignmentParams,
) -> Result<Vec<EvalReport>> {
    distances
        .iter()
        .map(|&d| evaluate_with(queries, catalog, n, scenario, d.name(), |t, q| d.delta(t, q, params)))
        .collect()
}

/// A distance that orders targets by a fixed pseudo-random permutation
/// per query. Its expected mean rank is `(N + 1) / 2`.
pub fn chance_score(seed: u64) -> impl Fn(&EmbeddingSequence, &EmbeddingSequence) -> Result<f64> + Sync {
    move |target, query| {
        let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
        for b in query.clip_id.bytes().chain([0xff]).chain(target.clip_id.bytes()) {
            h = splitmix(h ^ b as u64);
        }
        Ok((h >> 11) as f64 / (1u64 << 53) as f64)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Table layout: one row per (scenario, segmenter, distance).
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("scenario,segmenter,distance,n,queries,excluded,r@1,r@10,r@25,mean_rank,ci95,wall_ms\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.1},{:.1},{:.1},{:.2},{:.2},{}\n",
            r.scenario,
            r.segmenter,
            r.distance,
            r.n,
            r.n_queries,
            r.excluded,
            r.r_at_1,
            r.r_at_10,
            r.r_at_25,
            r.mean_rank,
            r.ci95,
            r.wall_ms.map(|w| format!("{w:.1}")).unwrap_or_default(),
        ));
    }
    out
}
