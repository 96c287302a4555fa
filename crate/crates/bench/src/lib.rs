//! Fixtures shared by the benchmarks.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segmatch::features::Modality;
use segmatch::ranking::EmbeddingSequence;
use segmatch::segmentation::SegmenterKind;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x dim` matrix with unit-norm rows.
pub fn unit_rows(rng: &mut impl Rng, rows: usize, dim: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_simple_fn((rows, dim), || rng.random::<f64>() - 0.5);
    for mut r in m.axis_iter_mut(Axis(0)) {
        let n = r.dot(&r).sqrt();
        r /= n;
    }
    m
}

pub fn sequence(rng: &mut impl Rng, id: &str, modality: Modality, len: usize, dim: usize) -> EmbeddingSequence {
    EmbeddingSequence::new(id, modality, SegmenterKind::Foote, unit_rows(rng, len, dim)).expect("len >= 1")
}

/// Music catalog with 3 to 8 segments per track.
pub fn catalog(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<EmbeddingSequence> {
    (0..n)
        .map(|i| {
            let k = rng.random_range(3..=8);
            sequence(rng, &format!("clip{i:05}"), Modality::Music, k, dim)
        })
        .collect()
}

pub fn inputs(rng: &mut impl Rng, rows: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, dim), || rng.random::<f64>() * 2.0 - 1.0)
}
