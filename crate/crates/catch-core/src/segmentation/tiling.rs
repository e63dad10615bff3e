//! TextTiling boundary inference over a boundary-score sequence.
//!
//! A gap is a valley when both its left and right monotone runs climb to a
//! strictly higher score. The depth of a valley is
//! `(left_peak - score) + (right_peak - score)`; boundaries are the valleys
//! whose depth exceeds the cutoff `mean - stddev / 2` taken over the full
//! depth-score sequence (non-valleys contribute depth 0).

use serde::{Deserialize, Serialize};

/// Boundary placement policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ValleyPolicy {
    /// Classic depth-score cutoff, mean - stddev/2.
    Depth,
    /// Absolute threshold on the raw score: every gap scoring below the
    /// threshold becomes a boundary.
    Absolute { threshold: f64 },
}

impl Default for ValleyPolicy {
    fn default() -> Self {
        ValleyPolicy::Depth
    }
}

fn left_peak(scores: &[f64], i: usize) -> f64 {
    let mut j = i;
    while j > 0 && scores[j - 1] >= scores[j] {
        j -= 1;
    }
    scores[j]
}

fn right_peak(scores: &[f64], i: usize) -> f64 {
    let mut j = i;
    while j + 1 < scores.len() && scores[j + 1] >= scores[j] {
        j += 1;
    }
    scores[j]
}

/// Depth per gap; zero for non-valleys.
fn depth_scores(scores: &[f64]) -> Vec<f64> {
    (0..scores.len())
        .map(|i| {
            let (l, r) = (left_peak(scores, i), right_peak(scores, i));
            if l > scores[i] && r > scores[i] {
                (l - scores[i]) + (r - scores[i])
            } else {
                0.0
            }
        })
        .collect()
}

/// Boundary gap indices, ascending. A boundary at index `i` cuts between
/// turns `i` and `i + 1`. Pure function of the score list.
pub fn text_tiling(scores: &[f64], policy: &ValleyPolicy) -> Vec<usize> {
    match policy {
        ValleyPolicy::Absolute { threshold } => (0..scores.len())
            .filter(|&i| scores[i] < *threshold)
            .collect(),
        ValleyPolicy::Depth => {
            let depths = depth_scores(scores);
            let n = depths.len() as f64;
            if depths.is_empty() {
                return Vec::new();
            }
            let mean = depths.iter().sum::<f64>() / n;
            let var = depths.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
            let cutoff = mean - var.sqrt() / 2.0;
            (0..scores.len())
                .filter(|&i| depths[i] > 0.0 && depths[i] > cutoff)
                .collect()
        }
    }
}
