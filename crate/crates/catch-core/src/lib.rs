//! Controllable theme detection over multi-turn dialogues.
//!
//! The pipeline runs in four stages: context-aware topic segmentation over
//! precomputed utterance embeddings, preference-enhanced clustering of the
//! resulting theme representations, hierarchical LLM-driven theme labeling,
//! and a metric suite (Hungarian accuracy, NMI, ROUGE, cosine similarity)
//! with an FCC perturbation harness.

pub mod clustering;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod manifest;
pub mod parallel;
pub mod pipeline;
pub mod segmentation;
pub mod vecmath;

pub use config::PipelineConfig;
pub use corpus::{Corpus, Dialogue, PreferencePair, Relation, Utterance, UtteranceRef};
pub use embedding::EmbeddingStore;
pub use error::{Error, Result};
pub use evaluation::MetricReport;
pub use manifest::RunManifest;
