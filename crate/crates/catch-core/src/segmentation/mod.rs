//! Context-aware topic segmentation: boundary scoring under trainable
//! projection heads, TextTiling inference, and segment-level theme
//! representations.

mod adapt;
mod head;
mod loss;
mod score;
mod segment;
mod tiling;

pub use adapt::{adapt, AdaptConfig, TrainingLog};
pub use head::{HeadKind, ProjectionHead};
pub use loss::{
    combined_loss, pair_contrastive_loss, topic_contrastive_loss, ContrastiveBatch, PairBatch,
};
pub use score::{boundary_scores, BoundaryScore};
pub use segment::{segment_dialogue, segment_key, Segment, SegmentRow};
pub use tiling::{text_tiling, ValleyPolicy};
