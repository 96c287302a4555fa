//! Two-branch fully connected embedding network.
//!
//! Each branch is a stack of dense layers with ReLU (and dropout while
//! training) between them; the last dense layer is linear and followed by
//! batch normalization and L2 normalization, so every embedding has unit
//! norm. All arithmetic is in `f64`.

mod checkpoint;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Modality, MUSIC_DIM, VIDEO_DIM};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

pub const EMBEDDING_DIM: usize = 512;
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPSILON: f64 = 1e-5;
pub const L2_EPSILON: f64 = 1e-12;
/// Pre-normalization norms below this are reported as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub input_dim: usize,
    /// Output width of every dense layer; the last one is the embedding size.
    pub layer_widths: Vec<usize>,
}

impl BranchSpec {
    pub fn music() -> Self {
        Self {
            input_dim: MUSIC_DIM,
            layer_widths: vec![2048, 1024, EMBEDDING_DIM],
        }
    }

    pub fn video() -> Self {
        Self {
            input_dim: VIDEO_DIM,
            layer_widths: vec![2048, EMBEDDING_DIM],
        }
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated branch has layers")
    }

    /// Dense weights and biases plus the batch-norm scale and shift.
    pub fn trainable_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut total = 0;
        for &w in &self.layer_widths {
            total += fan_in * w + w;
            fan_in = w;
        }
        total + 2 * fan_in
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(Error::Config(format!("invalid branch spec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub music: BranchSpec,
    pub video: BranchSpec,
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            music: BranchSpec::music(),
            video: BranchSpec::video(),
            dropout: DEFAULT_DROPOUT,
            bn_momentum: BN_MOMENTUM,
            bn_epsilon: BN_EPSILON,
        }
    }
}

impl NetSpec {
    pub fn branch(&self, which: Modality) -> &BranchSpec {
        match which {
            Modality::Music => &self.music,
            Modality::Video => &self.video,
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.music.trainable_count() + self.video.trainable_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.music.validate()?;
        self.video.validate()?;
        if self.music.output_dim() != self.video.output_dim() {
            return Err(Error::Config("branches must share the embedding size".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub layers: Vec<Dense>,
    pub bn: BatchNorm,
}

/// Everything learned (and the batch-norm running statistics) for both branches.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBranchParams {
    pub spec: NetSpec,
    pub music: Branch,
    pub video: Branch,
}

/// Forward mode. Dropout masks in training mode are drawn from
/// `dropout_seed`, so two forwards with the same seed see the same masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { dropout_seed: u64 },
    Infer,
}

/// Activations kept by a training forward pass for [`TwoBranchParams::backward`].
#[derive(Debug, Clone)]
pub struct BranchCache {
    branch: Modality,
    /// Input to every dense layer.
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    hidden_pre: Vec<Array2<f64>>,
    /// Inverted-dropout scale per hidden unit (0 or 1/(1-p)).
    masks: Vec<Option<Array2<f64>>>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    bn_out: Array2<f64>,
    row_norms: Array1<f64>,
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
}

impl BranchCache {
    pub fn branch(&self) -> Modality {
        self.branch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchGrads {
    pub layers: Vec<DenseGrad>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Gradients for every trainable tensor, laid out like [`TwoBranchParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub music: BranchGrads,
    pub video: BranchGrads,
}

impl BranchGrads {
    fn zeros_like(branch: &Branch) -> Self {
        Self {
            layers: branch
                .layers
                .iter()
                .map(|l| DenseGrad {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            gamma: Array1::zeros(branch.bn.gamma.len()),
            beta: Array1::zeros(branch.bn.beta.len()),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        out.push(self.gamma.as_slice().expect("standard layout"));
        out.push(self.beta.as_slice().expect("standard layout"));
        out
    }
}

impl Gradients {
    pub fn zeros_like(params: &TwoBranchParams) -> Self {
        Self {
            music: BranchGrads::zeros_like(&params.music),
            video: BranchGrads::zeros_like(&params.video),
        }
    }

    pub fn branch_mut(&mut self, which: Modality) -> &mut BranchGrads {
        match which {
            Modality::Music => &mut self.music,
            Modality::Video => &mut self.video,
        }
    }

    /// Flat views in the same order as [`TwoBranchParams::trainables_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.music.tensors();
        out.extend(self.video.tensors());
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Branch {
    fn init(spec: &BranchSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut fan_in = spec.input_dim;
        let mut layers = Vec::with_capacity(spec.layer_widths.len());
        for &w in &spec.layer_widths {
            let bound = (6.0 / fan_in as f64).sqrt();
            layers.push(Dense {
                weight: Array2::from_shape_simple_fn((fan_in, w), || rng.random_range(-bound..bound)),
                bias: Array1::zeros(w),
            });
            fan_in = w;
        }
        Branch {
            layers,
            bn: BatchNorm {
                gamma: Array1::ones(fan_in),
                beta: Array1::zeros(fan_in),
                running_mean: Array1::zeros(fan_in),
                running_var: Array1::ones(fan_in),
            },
        }
    }

    fn trainables_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.bn.gamma.as_slice_mut().expect("standard layout"));
        out.push(self.bn.beta.as_slice_mut().expect("standard layout"));
        out
    }
}

/// Row-wise L2 normalization with the epsilon under the square root.
fn l2_normalize(y: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let mut norms = Array1::zeros(y.nrows());
    for (i, row) in y.rows().into_iter().enumerate() {
        let sq = row.dot(&row);
        if sq.sqrt() < DEGENERATE_NORM {
            return Err(Error::DegenerateEmbedding { norm: sq.sqrt() });
        }
        norms[i] = (sq + L2_EPSILON).sqrt();
    }
    let e = y / &norms.view().insert_axis(Axis(1));
    Ok((e, norms))
}

/// Vector-Jacobian product of `y -> y / s`, `s = sqrt(|y|^2 + eps)`:
/// writes `g / s - y (y . g) / s^3` into `out`.
pub(crate) fn normalize_vjp(y: ArrayView1<f64>, g: ArrayView1<f64>, s: f64, mut out: ArrayViewMut1<f64>) {
    let proj = y.dot(&g) / (s * s * s);
    Zip::from(&mut out)
        .and(&g)
        .and(&y)
        .for_each(|d, &g, &y| *d = g / s - y * proj);
}

fn affine(input: &ArrayView2<f64>, layer: &Dense) -> Array2<f64> {
    let mut z = input.dot(&layer.weight);
    z += &layer.bias;
    z
}

impl TwoBranchParams {
    /// Fan-in scaled uniform weights, zero biases, identity batch norm.
    pub fn init(spec: NetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let music = Branch::init(&spec.music, &mut rng);
        let video = Branch::init(&spec.video, &mut rng);
        Ok(Self { spec, music, video })
    }

    pub fn branch(&self, which: Modality) -> &Branch {
        match which {
            Modality::Music => &self.music,
            Modality::Video => &self.video,
        }
    }

    pub fn branch_mut(&mut self, which: Modality) -> &mut Branch {
        match which {
            Modality::Music => &mut self.music,
            Modality::Video => &mut self.video,
        }
    }

    /// Counts the actual tensors, independent of the spec formula.
    pub fn trainable_count(&self) -> usize {
        [&self.music, &self.video]
            .iter()
            .map(|b| {
                b.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>()
                    + b.bn.gamma.len()
                    + b.bn.beta.len()
            })
            .sum()
    }

    /// Flat mutable views of every trainable tensor: per branch (music then
    /// video) each layer's weight and bias, then gamma and beta.
    pub fn trainables_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.music.trainables_mut();
        out.extend(self.video.trainables_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        [&self.music, &self.video].iter().all(|b| {
            b.layers
                .iter()
                .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
                && [&b.bn.gamma, &b.bn.beta, &b.bn.running_mean, &b.bn.running_var]
                    .iter()
                    .all(|a| a.iter().all(|v| v.is_finite()))
        })
    }

    fn check_input(&self, which: Modality, inputs: &ArrayView2<f64>) -> Result<()> {
        let expected = self.spec.branch(which).input_dim;
        if inputs.ncols() != expected {
            return Err(Error::Shape(format!(
                "{which} branch expects {expected} input features, got {}",
                inputs.ncols()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Shape("empty input batch".into()));
        }
        Ok(())
    }

    /// Projects `inputs` (one row per segment) into unit-norm embeddings
    /// using the running batch-norm statistics and no dropout.
    pub fn embed(&self, which: Modality, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(which, &inputs)?;
        let branch = self.branch(which);
        let last = branch.layers.len() - 1;
        let mut h = inputs.to_owned();
        for (l, layer) in branch.layers.iter().enumerate() {
            h = affine(&h.view(), layer);
            if l < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        let bn = &branch.bn;
        let scale = bn.gamma.clone() / bn.running_var.mapv(|v| (v + self.spec.bn_epsilon).sqrt());
        Zip::from(h.rows_mut()).for_each(|mut row| {
            Zip::from(&mut row)
                .and(&bn.running_mean)
                .and(&scale)
                .and(&bn.beta)
                .for_each(|x, &m, &s, &b| *x = (*x - m) * s + b);
        });
        Ok(l2_normalize(&h)?.0)
    }

    /// Generic entry point; training mode also returns the activation cache.
    pub fn forward(
        &self,
        which: Modality,
        inputs: ArrayView2<f64>,
        mode: Mode,
    ) -> Result<(Array2<f64>, Option<BranchCache>)> {
        match mode {
            Mode::Infer => Ok((self.embed(which, inputs)?, None)),
            Mode::Train { dropout_seed } => {
                let (e, cache) = self.forward_train(which, inputs, dropout_seed)?;
                Ok((e, Some(cache)))
            }
        }
    }

    /// Training-mode forward: batch statistics in batch norm and inverted
    /// dropout after every hidden ReLU. Parameters are not touched; apply
    /// the running-statistics update with [`Self::update_running_stats`].
    pub fn forward_train(
        &self,
        which: Modality,
        inputs: ArrayView2<f64>,
        dropout_seed: u64,
    ) -> Result<(Array2<f64>, BranchCache)> {
        self.check_input(which, &inputs)?;
        let n = inputs.nrows();
        if n < 2 {
            return Err(Error::Shape("training mode needs at least two rows".into()));
        }
        let branch = self.branch(which);
        let p = self.spec.dropout;
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        rng.set_stream(which.code() as u64 + 1);

        let last = branch.layers.len() - 1;
        let mut layer_inputs = Vec::with_capacity(branch.layers.len());
        let mut hidden_pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut h = inputs.to_owned();
        for layer in &branch.layers[..last] {
            let z = affine(&h.view(), layer);
            let mut a = z.mapv(|v| v.max(0.0));
            let mask = (p > 0.0).then(|| {
                let keep = 1.0 / (1.0 - p);
                Array2::from_shape_simple_fn(a.raw_dim(), || if rng.random::<f64>() < p { 0.0 } else { keep })
            });
            if let Some(m) = &mask {
                a *= m;
            }
            layer_inputs.push(std::mem::replace(&mut h, a));
            hidden_pre.push(z);
            masks.push(mask);
        }
        let z = affine(&h.view(), &branch.layers[last]);
        layer_inputs.push(h);

        let nf = n as f64;
        let mean = z.sum_axis(Axis(0)) / nf;
        let centered = &z - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / nf;
        let inv_std = var.mapv(|v| 1.0 / (v + self.spec.bn_epsilon).sqrt());
        let xhat = centered * &inv_std;
        let bn_out = &xhat * &branch.bn.gamma + &branch.bn.beta;
        let (e, row_norms) = l2_normalize(&bn_out)?;
        Ok((
            e,
            BranchCache {
                branch: which,
                layer_inputs,
                hidden_pre,
                masks,
                xhat,
                inv_std,
                bn_out,
                row_norms,
                batch_mean: mean,
                batch_var: var,
            },
        ))
    }

    /// `running = momentum * running + (1 - momentum) * batch`.
    pub fn update_running_stats(&mut self, cache: &BranchCache) {
        let momentum = self.spec.bn_momentum;
        let bn = &mut self.branch_mut(cache.branch).bn;
        Zip::from(&mut bn.running_mean)
            .and(&cache.batch_mean)
            .for_each(|r, &b| *r = momentum * *r + (1.0 - momentum) * b);
        Zip::from(&mut bn.running_var)
            .and(&cache.batch_var)
            .for_each(|r, &b| *r = momentum * *r + (1.0 - momentum) * b);
    }

    /// Exact gradients of a scalar loss given `upstream = dLoss/dEmbeddings`
    /// for the batch cached by [`Self::forward_train`].
    pub fn backward(&self, cache: &BranchCache, upstream: ArrayView2<f64>) -> Result<BranchGrads> {
        let branch = self.branch(cache.branch);
        if upstream.raw_dim() != cache.bn_out.raw_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match embeddings {:?}",
                upstream.shape(),
                cache.bn_out.shape()
            )));
        }
        let n = upstream.nrows() as f64;

        // through e = y / sqrt(|y|^2 + eps)
        let mut dy = Array2::zeros(upstream.raw_dim());
        Zip::from(dy.rows_mut())
            .and(upstream.rows())
            .and(cache.bn_out.rows())
            .and(&cache.row_norms)
            .for_each(|mut d, g, y, &s| normalize_vjp(y, g, s, d.view_mut()));

        // batch norm with batch statistics
        let gamma_grad = (&dy * &cache.xhat).sum_axis(Axis(0));
        let beta_grad = dy.sum_axis(Axis(0));
        let dxhat = dy * &branch.bn.gamma;
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
        let mut dz = dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat;
        dz *= &(&cache.inv_std / n);

        let mut layers = Vec::with_capacity(branch.layers.len());
        for l in (0..branch.layers.len()).rev() {
            let input = &cache.layer_inputs[l];
            layers.push(DenseGrad {
                weight: input.t().dot(&dz),
                bias: dz.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut dh = dz.dot(&branch.layers[l].weight.t());
                if let Some(mask) = &cache.masks[l - 1] {
                    dh *= mask;
                }
                Zip::from(&mut dh).and(&cache.hidden_pre[l - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = dh;
            }
        }
        layers.reverse();
        Ok(BranchGrads {
            layers,
            gamma: gamma_grad,
            beta: beta_grad,
        })
    }
}
