//! Segment-level self-supervised training with a bidirectional triplet loss.
//!
//! A batch holds one (video, music) segment pair from each of `b` distinct
//! clips. With the video segment as anchor, its own music segment is the
//! positive and every other music row in the batch is a negative (and the
//! same with the roles swapped), giving `b * (b - 1)` triplets per direction.

mod adam;
mod loss;

use std::time::Instant;

use log::info;
use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{NetSpec, TwoBranchParams};
use crate::error::{Error, Result};
use crate::features::Modality;
use crate::segmentation::SegmentedClip;

pub use adam::Adam;
pub use loss::{batch_loss, batch_loss_value, embedding_loss, triplet_loss, BatchLoss, EmbeddingLoss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub margin: f64,
    pub lambda_vm: f64,
    pub lambda_mv: f64,
    pub learning_rate: f64,
    pub dropout: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub min_delta: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Seed of the fixed validation batches.
    pub validation_seed: u64,
    /// Also use a different segment of the anchor's own clip as a negative.
    pub same_clip_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1000,
            margin: 0.1,
            lambda_vm: 1.0,
            lambda_mv: 1.0,
            learning_rate: 1e-6,
            dropout: 0.5,
            patience: 10,
            min_delta: 1e-5,
            max_epochs: 200,
            seed: 0,
            validation_seed: 0x5eed,
            same_clip_negatives: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::Config("margin must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Inputs of one training batch. Rows `0..num_pairs` are the anchor and
/// positive pairs (row `i` of both matrices comes from the same clip and
/// segment). Optional extra rows are used only as negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub clip_ids: Vec<String>,
    pub segment_indices: Vec<usize>,
    pub num_pairs: usize,
    pub music: Array2<f64>,
    pub video: Array2<f64>,
    /// For every extra row, the batch pair it was drawn from.
    pub extra_owner: Vec<usize>,
}

impl TripletBatch {
    pub fn num_rows(&self) -> usize {
        self.music.nrows()
    }

    /// Triplets formed per loss direction.
    pub fn triplets_per_direction(&self) -> usize {
        self.num_pairs * (self.num_rows() - 1)
    }
}

/// Samples `b` distinct clips and one uniformly drawn segment from each.
pub fn mine_batch<R: Rng>(catalog: &[SegmentedClip], b: usize, rng: &mut R) -> Result<TripletBatch> {
    if b < 2 {
        return Err(Error::Config(
            "a batch needs at least two clips to have negatives".into(),
        ));
    }
    if catalog.len() < b {
        return Err(Error::CatalogTooSmall {
            needed: b,
            available: catalog.len(),
        });
    }
    let picks = index::sample(rng, catalog.len(), b).into_vec();
    batch_from_clips(catalog, &picks, rng, false)
}

/// Builds a batch from the given clips, drawing one segment per clip. With
/// `same_clip_negatives`, each clip with at least two segments also
/// contributes a second, different segment as an extra negative row.
pub fn batch_from_clips<R: Rng>(
    catalog: &[SegmentedClip],
    clips: &[usize],
    rng: &mut R,
    same_clip_negatives: bool,
) -> Result<TripletBatch> {
    let first = catalog
        .get(*clips.first().ok_or_else(|| Error::Config("empty batch".into()))?)
        .ok_or_else(|| Error::Shape("clip index out of range".into()))?;
    let (dm, dv) = (first.music_inputs.ncols(), first.video_inputs.ncols());
    let mut segment_indices = Vec::with_capacity(clips.len());
    let mut extras = Vec::new();
    for (pos, &c) in clips.iter().enumerate() {
        let clip = catalog
            .get(c)
            .ok_or_else(|| Error::Shape("clip index out of range".into()))?;
        let k = clip.num_segments();
        if k == 0 {
            return Err(Error::invariant(format!("{} has no segments", clip.clip_id)));
        }
        let s = rng.random_range(0..k);
        segment_indices.push(s);
        if same_clip_negatives && k >= 2 {
            let other = (s + rng.random_range(1..k)) % k;
            extras.push((pos, other));
        }
    }
    let rows = clips.len() + extras.len();
    let mut music = Array2::zeros((rows, dm));
    let mut video = Array2::zeros((rows, dv));
    let all = clips
        .iter()
        .zip(&segment_indices)
        .map(|(&c, &s)| (c, s))
        .chain(extras.iter().map(|&(pos, s)| (clips[pos], s)));
    for (row, (c, s)) in all.enumerate() {
        let clip = &catalog[c];
        if clip.music_inputs.ncols() != dm || clip.video_inputs.ncols() != dv {
            return Err(Error::Shape(format!("{} has inconsistent feature dims", clip.clip_id)));
        }
        music.row_mut(row).assign(&clip.music_inputs.row(s));
        video.row_mut(row).assign(&clip.video_inputs.row(s));
    }
    Ok(TripletBatch {
        clip_ids: clips.iter().map(|&c| catalog[c].clip_id.clone()).collect(),
        segment_indices,
        num_pairs: clips.len(),
        music,
        video,
        extra_owner: extras.iter().map(|&(pos, _)| pos).collect(),
    })
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training batch loss; absent for the epoch-0 record taken before
    /// any update.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation loss.
    pub params: TwoBranchParams,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Mean validation loss over fixed batches: infer-mode embeddings, no
/// dropout, batches drawn from `seed` so every epoch sees the same ones.
pub fn validation_loss(params: &TwoBranchParams, catalog: &[SegmentedClip], config: &TrainConfig) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.validation_seed);
    let mut order: Vec<usize> = (0..catalog.len()).collect();
    order.shuffle(&mut rng);
    let b = config.batch_size.min(catalog.len());
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(b).filter(|c| c.len() >= 2) {
        let batch = batch_from_clips(catalog, chunk, &mut rng, config.same_clip_negatives)?;
        total += batch_loss_value(params, &batch, config)?;
        batches += 1;
    }
    if batches == 0 {
        return Err(Error::CatalogTooSmall {
            needed: 2,
            available: catalog.len(),
        });
    }
    Ok(total / batches as f64)
}

/// Trains from `init` until validation loss stops improving for
/// `patience` epochs or `max_epochs` is reached. `on_epoch` sees every log
/// record as it is produced.
pub fn train(
    config: &TrainConfig,
    init: TwoBranchParams,
    train_set: &[SegmentedClip],
    val_set: &[SegmentedClip],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.len() < 2 {
        return Err(Error::CatalogTooSmall {
            needed: 2,
            available: train_set.len(),
        });
    }
    let mut params = init;
    params.spec.dropout = config.dropout;
    let mut adam = Adam::new(&mut params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let started = Instant::now();
    let initial = validation_loss(&params, val_set, config)?;
    let mut log = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        val_loss: initial,
        lr: config.learning_rate,
        wall_s: Some(started.elapsed().as_secs_f64()),
    }];
    on_epoch(&log[0]);

    let mut best = (initial, 0usize, params.clone());
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let b = config.batch_size.min(train_set.len());

    for epoch in 1..=config.max_epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(b).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch = batch_from_clips(train_set, chunk, &mut rng, config.same_clip_negatives)?;
            let dropout_seed = rng.random::<u64>();
            let out = batch_loss(&params, &batch, config, dropout_seed)?;
            if !out.loss.is_finite() || !out.grads.max_abs().is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    detail: format!("loss {} (vm {}, mv {})", out.loss, out.loss_vm, out.loss_mv),
                });
            }
            adam.step(&mut params, &out.grads);
            params.update_running_stats(&out.music_cache);
            params.update_running_stats(&out.video_cache);
            if !params.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    detail: "parameters became non-finite after the update".into(),
                });
            }
            loss_sum += out.loss;
            batches += 1;
        }
        let val = validation_loss(&params, val_set, config)?;
        let record = EpochRecord {
            epoch,
            train_loss: Some(loss_sum / batches.max(1) as f64),
            val_loss: val,
            lr: config.learning_rate,
            wall_s: Some(epoch_start.elapsed().as_secs_f64()),
        };
        info!(
            "epoch {epoch}: train {:.6} val {val:.6}",
            record.train_loss.unwrap_or(f64::NAN)
        );
        on_epoch(&record);
        log.push(record);

        if val < best.0 - config.min_delta {
            best = (val, epoch, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, params) = best;
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_val_loss,
        log,
        stopped_early,
    })
}

/// Network spec for the given input dims and training config, with the
/// default layer widths.
pub fn net_spec_for(music_dim: usize, video_dim: usize, config: &TrainConfig) -> NetSpec {
    let mut spec = NetSpec::default();
    spec.music.input_dim = music_dim;
    spec.video.input_dim = video_dim;
    spec.dropout = config.dropout;
    spec
}

/// Feature dims of a segmented catalog, checking they agree across clips.
pub fn catalog_dims(catalog: &[SegmentedClip]) -> Result<(usize, usize)> {
    let first = catalog.first().ok_or(Error::CatalogTooSmall {
        needed: 1,
        available: 0,
    })?;
    let dims = (first.music_inputs.len_of(Axis(1)), first.video_inputs.len_of(Axis(1)));
    for c in catalog {
        if (c.music_inputs.ncols(), c.video_inputs.ncols()) != dims {
            return Err(Error::Shape(format!("{} has inconsistent feature dims", c.clip_id)));
        }
    }
    Ok(dims)
}

pub(crate) fn branch_input<'a>(batch: &'a TripletBatch, which: Modality) -> &'a Array2<f64> {
    match which {
        Modality::Music => &batch.music,
        Modality::Video => &batch.video,
    }
}
