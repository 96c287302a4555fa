//! Segment-level video-to-music recommendation.
//!
//! Clips are split into temporally ordered segments, every segment of each
//! modality is projected into a shared 512-d unit-norm space by a two-branch
//! network trained with a bidirectional triplet loss, and a music catalog is
//! ranked against a video query with set or sequence-alignment distances
//! between the two embedding sequences.
//!
//! ```text
//! features -> segmentation -> embed (two-branch net) -> ranking -> evaluation
//!                                  ^
//!                               train
//! ```

mod container;
pub mod embed;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod pipeline;
pub mod ranking;
pub mod segmentation;
pub mod train;

pub use embed::{TwoBranchParams, EMBEDDING_DIM};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, Scenario};
pub use features::{FrameFeatureSequence, Modality};
pub use pipeline::RunConfig;
pub use ranking::{Distance, EmbeddingSequence, RankedList};
pub use segmentation::{Boundaries, SegmentedClip, SegmenterKind};
pub use train::TrainConfig;
