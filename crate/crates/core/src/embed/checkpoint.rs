//! Checkpoint file: magic `SVMC`, version, a length-prefixed JSON metadata
//! block, then every tensor as raw little-endian `f64` in declared order.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{BatchNorm, Branch, Dense, NetSpec, TwoBranchParams};
use crate::container::{self, Cursor};
use crate::error::{Error, Result};
use crate::segmentation::SegmenterKind;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SVMC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Segmenter the network was trained with; a network is only valid for
    /// segments produced by the same one.
    pub segmenter: SegmenterKind,
    pub epoch: usize,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
    #[serde(default)]
    pub run_config: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: CheckpointMeta,
    net: NetSpec,
    tensors: Vec<TensorDecl>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorDecl {
    name: String,
    shape: Vec<usize>,
}

fn branch_tensors<'a>(prefix: &str, b: &'a Branch, decls: &mut Vec<TensorDecl>, data: &mut Vec<&'a [f64]>) {
    let mut push = |name: String, shape: Vec<usize>, v: &'a [f64]| {
        decls.push(TensorDecl { name, shape });
        data.push(v);
    };
    for (i, l) in b.layers.iter().enumerate() {
        push(
            format!("{prefix}.dense{i}.weight"),
            l.weight.shape().to_vec(),
            l.weight.as_slice().unwrap(),
        );
        push(
            format!("{prefix}.dense{i}.bias"),
            vec![l.bias.len()],
            l.bias.as_slice().unwrap(),
        );
    }
    let bn = &b.bn;
    push(
        format!("{prefix}.bn.gamma"),
        vec![bn.gamma.len()],
        bn.gamma.as_slice().unwrap(),
    );
    push(
        format!("{prefix}.bn.beta"),
        vec![bn.beta.len()],
        bn.beta.as_slice().unwrap(),
    );
    push(
        format!("{prefix}.bn.running_mean"),
        vec![bn.running_mean.len()],
        bn.running_mean.as_slice().unwrap(),
    );
    push(
        format!("{prefix}.bn.running_var"),
        vec![bn.running_var.len()],
        bn.running_var.as_slice().unwrap(),
    );
}

pub fn save_checkpoint(params: &TwoBranchParams, meta: &CheckpointMeta, path: impl AsRef<Path>) -> Result<()> {
    let mut tensors = Vec::new();
    let mut data = Vec::new();
    branch_tensors("music", &params.music, &mut tensors, &mut data);
    branch_tensors("video", &params.video, &mut tensors, &mut data);
    let header = Header {
        meta: meta.clone(),
        net: params.spec.clone(),
        tensors,
    };
    container::write(path.as_ref(), CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &header, &data)
}

/// Loads a checkpoint. When `requested` is given and differs from the
/// recorded segmenter the load is refused unless `force` is set.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    requested: Option<&SegmenterKind>,
    force: bool,
) -> Result<(TwoBranchParams, CheckpointMeta)> {
    let (header, values): (Header, Vec<f64>) = container::read(path.as_ref(), CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    if let Some(req) = requested {
        if *req != header.meta.segmenter && !force {
            return Err(Error::SegmenterMismatch {
                trained: header.meta.segmenter.to_string(),
                requested: req.to_string(),
            });
        }
    }
    header.net.validate()?;
    let mut cursor = Cursor::new(&values);
    let mut decls = header.tensors.iter();
    let mut next = |expect_shape: Vec<usize>| -> Result<&[f64]> {
        let decl = decls
            .next()
            .ok_or_else(|| Error::Malformed("fewer tensors than the network needs".into()))?;
        if decl.shape != expect_shape {
            return Err(Error::Malformed(format!(
                "tensor {} has shape {:?}, network expects {:?}",
                decl.name, decl.shape, expect_shape
            )));
        }
        cursor.take(expect_shape.iter().product())
    };
    let mut read_branch = |spec: &super::BranchSpec| -> Result<Branch> {
        let mut fan_in = spec.input_dim;
        let mut layers = Vec::new();
        for &w in &spec.layer_widths {
            let weight = Array2::from_shape_vec((fan_in, w), next(vec![fan_in, w])?.to_vec())
                .map_err(|e| Error::Malformed(e.to_string()))?;
            let bias = Array1::from(next(vec![w])?.to_vec());
            layers.push(Dense { weight, bias });
            fan_in = w;
        }
        let mut vec1 = || next(vec![fan_in]).map(|s| Array1::from(s.to_vec()));
        let bn = BatchNorm {
            gamma: vec1()?,
            beta: vec1()?,
            running_mean: vec1()?,
            running_var: vec1()?,
        };
        Ok(Branch { layers, bn })
    };
    let music = read_branch(&header.net.music)?;
    let video = read_branch(&header.net.video)?;
    if decls.next().is_some() {
        return Err(Error::Malformed("more tensors declared than the network has".into()));
    }
    cursor.finish()?;
    let params = TwoBranchParams {
        spec: header.net,
        music,
        video,
    };
    if !params.is_finite() {
        return Err(Error::Malformed("checkpoint contains non-finite values".into()));
    }
    Ok((params, header.meta))
}
