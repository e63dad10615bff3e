//! Contiguous dialogue segments and their theme representations.

use serde::{Deserialize, Serialize};

use super::head::ProjectionHead;
use crate::corpus::Dialogue;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::vecmath;

/// One contextual block: turns `start..=end` of a dialogue, with the
/// re-normalized mean of the members' topic-projected embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub dialogue_id: String,
    pub start: usize,
    pub end: usize,
    pub representation: Vec<f64>,
}

impl Segment {
    /// Store key for the segment representation, `dialogue_id:start-end`.
    pub fn key(&self) -> String {
        segment_key(&self.dialogue_id, self.start, self.end)
    }

    pub fn contains(&self, turn_index: usize) -> bool {
        (self.start..=self.end).contains(&turn_index)
    }

    /// Member turn texts joined into one contextual block.
    pub fn text_in(&self, dialogue: &Dialogue) -> String {
        dialogue.turns[self.start..=self.end]
            .iter()
            .map(|u| u.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn segment_key(dialogue_id: &str, start: usize, end: usize) -> String {
    format!("{dialogue_id}:{start}-{end}")
}

/// JSONL row for the segments artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRow {
    pub dialogue_id: String,
    pub start: usize,
    pub end: usize,
    pub key: String,
}

/// Cut a dialogue at the given boundary gap indices. The result partitions
/// `0..n-1`; a boundary at `b` ends a segment at turn `b`.
pub fn segment_dialogue(
    dialogue: &Dialogue,
    boundaries: &[usize],
    store: &EmbeddingStore,
    topic_head: &ProjectionHead,
) -> Result<Vec<Segment>> {
    let n = dialogue.len();
    for w in boundaries.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Invariant("boundaries must be strictly ascending".into()));
        }
    }
    if let Some(&last) = boundaries.last() {
        if n < 2 || last > n - 2 {
            return Err(Error::Invariant(format!(
                "boundary {last} out of range for {n} turns"
            )));
        }
    }

    let mut segments = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0usize;
    for &b in boundaries.iter().chain(std::iter::once(&(n - 1))) {
        let end = b.min(n - 1);
        let projected: Vec<Vec<f64>> = dialogue.turns[start..=end]
            .iter()
            .map(|u| topic_head.project(store.require(&u.key())?))
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = projected.iter().map(|v| v.as_slice()).collect();
        let representation = vecmath::normalized(
            &vecmath::mean(&refs),
            &format!("segment {}:{start}-{end}", dialogue.dialogue_id),
        )?;
        segments.push(Segment {
            dialogue_id: dialogue.dialogue_id.clone(),
            start,
            end,
            representation,
        });
        start = end + 1;
    }
    Ok(segments)
}
