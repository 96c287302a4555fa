use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::{branch_input, TrainConfig, TripletBatch};
use crate::embed::{BranchCache, Gradients, TwoBranchParams};
use crate::error::Result;
use crate::features::Modality;

/// `max(|a - p|^2 - |a - n|^2 + margin, 0)`.
pub fn triplet_loss(anchor: ArrayView1<f64>, positive: ArrayView1<f64>, negative: ArrayView1<f64>, margin: f64) -> f64 {
    let sq = |x: ArrayView1<f64>, y: ArrayView1<f64>| -> f64 {
        Zip::from(&x).and(&y).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
    };
    (sq(anchor, positive) - sq(anchor, negative) + margin).max(0.0)
}

/// Mean hinge over all in-batch triplets of one direction, and its gradient
/// w.r.t. the anchor rows and the candidate rows.
///
/// Anchor `c < pairs` has positive `cands[c]` and negatives `cands[j]` for
/// every `j != c`.
fn one_direction(
    anchors: ArrayView2<f64>,
    cands: ArrayView2<f64>,
    pairs: usize,
    margin: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let rows = cands.nrows();
    let triplets = (pairs * (rows - 1)) as f64;
    let a = anchors.slice(s![..pairs, ..]);
    let gram = a.dot(&cands.t());
    let a_sq: Array1<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let c_sq: Array1<f64> = cands.rows().into_iter().map(|r| r.dot(&r)).collect();
    let d_pos: Array1<f64> = (0..pairs)
        .map(|c| {
            let diff = &a.row(c) - &cands.row(c);
            diff.dot(&diff)
        })
        .collect();

    let mut active = Array2::<f64>::zeros((pairs, rows));
    let mut loss = 0.0;
    for c in 0..pairs {
        for j in 0..rows {
            if j == c {
                continue;
            }
            let d_neg = a_sq[c] + c_sq[j] - 2.0 * gram[[c, j]];
            let h = d_pos[c] - d_neg + margin;
            if h > 0.0 {
                loss += h;
                active[[c, j]] = 1.0;
            }
        }
    }
    let scale = 2.0 / triplets;
    let row_count = active.sum_axis(Axis(1));
    let col_count = active.sum_axis(Axis(0));

    // anchor: sum_j w_cj (c_j - c_c)
    let mut g_anchor = Array2::zeros(anchors.raw_dim());
    {
        let mut ga = g_anchor.slice_mut(s![..pairs, ..]);
        ga.assign(&active.dot(&cands));
        ga -= &(&cands.slice(s![..pairs, ..]) * &row_count.view().insert_axis(Axis(1)));
        ga *= scale;
    }
    // negatives: sum_c w_cj (a_c - c_j); positives: count_c (c_c - a_c)
    let mut g_cand = active.t().dot(&a);
    g_cand -= &(&cands * &col_count.view().insert_axis(Axis(1)));
    {
        let mut pos = g_cand.slice_mut(s![..pairs, ..]);
        pos += &((&cands.slice(s![..pairs, ..]) - &a) * &row_count.view().insert_axis(Axis(1)));
    }
    g_cand *= scale;
    (loss / triplets, g_anchor, g_cand)
}

/// Bidirectional loss on already computed embeddings, with its gradient
/// w.r.t. both embedding matrices.
#[derive(Debug, Clone)]
pub struct EmbeddingLoss {
    pub loss: f64,
    pub loss_vm: f64,
    pub loss_mv: f64,
    pub grad_music: Array2<f64>,
    pub grad_video: Array2<f64>,
}

/// `lambda_vm * L_VM + lambda_mv * L_MV`, where `L_VM` takes video rows as
/// anchors against music candidates and `L_MV` the reverse. Rows
/// `0..pairs` are matched pairs; each direction averages over
/// `pairs * (rows - 1)` triplets.
pub fn embedding_loss(
    music: ArrayView2<f64>,
    video: ArrayView2<f64>,
    pairs: usize,
    config: &TrainConfig,
) -> EmbeddingLoss {
    let (vm, gv_anchor, gm_cand) = one_direction(video, music, pairs, config.margin);
    let (mv, gm_anchor, gv_cand) = one_direction(music, video, pairs, config.margin);
    let (l1, l2) = (config.lambda_vm, config.lambda_mv);
    EmbeddingLoss {
        loss: l1 * vm + l2 * mv,
        loss_vm: vm,
        loss_mv: mv,
        grad_music: gm_cand * l1 + gm_anchor * l2,
        grad_video: gv_anchor * l1 + gv_cand * l2,
    }
}

#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub loss: f64,
    pub loss_vm: f64,
    pub loss_mv: f64,
    pub grads: Gradients,
    pub music_cache: BranchCache,
    pub video_cache: BranchCache,
}

/// Training-mode loss and exact parameter gradients for one batch.
pub fn batch_loss(
    params: &TwoBranchParams,
    batch: &TripletBatch,
    config: &TrainConfig,
    dropout_seed: u64,
) -> Result<BatchLoss> {
    let (em, music_cache) = params.forward_train(
        Modality::Music,
        branch_input(batch, Modality::Music).view(),
        dropout_seed,
    )?;
    let (ev, video_cache) = params.forward_train(
        Modality::Video,
        branch_input(batch, Modality::Video).view(),
        dropout_seed,
    )?;
    let out = embedding_loss(em.view(), ev.view(), batch.num_pairs, config);
    let grads = Gradients {
        music: params.backward(&music_cache, out.grad_music.view())?,
        video: params.backward(&video_cache, out.grad_video.view())?,
    };
    Ok(BatchLoss {
        loss: out.loss,
        loss_vm: out.loss_vm,
        loss_mv: out.loss_mv,
        grads,
        music_cache,
        video_cache,
    })
}

/// Inference-mode loss (running batch-norm statistics, no dropout).
pub fn batch_loss_value(params: &TwoBranchParams, batch: &TripletBatch, config: &TrainConfig) -> Result<f64> {
    let em = params.embed(Modality::Music, batch.music.view())?;
    let ev = params.embed(Modality::Video, batch.video.view())?;
    Ok(embedding_loss(em.view(), ev.view(), batch.num_pairs, config).loss)
}
