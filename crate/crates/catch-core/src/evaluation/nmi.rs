//! Normalized mutual information between two partitions.

use serde::{Deserialize, Serialize};

use super::hungarian::contingency;
use crate::error::{Error, Result};

/// How mutual information is normalized by the partition entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    Min,
    Geometric,
    #[default]
    Arithmetic,
    Max,
}

fn entropy_from_counts(counts: &[usize], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// NMI with the configured normalization. When both partitions have zero
/// entropy the partitions are identical and the score is 1; when exactly one
/// has zero entropy the score is 0.
pub fn nmi(pred: &[usize], gold: &[usize], normalization: NmiNormalization) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::Invariant(format!(
            "item-set mismatch: {} predicted vs {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Invariant("empty assignments".into()));
    }
    let c = contingency(pred, gold);
    let n = pred.len() as f64;
    let row_sums: Vec<usize> = c.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..c[0].len()).map(|j| c.iter().map(|r| r[j]).sum()).collect();

    let h_pred = entropy_from_counts(&row_sums, n);
    let h_gold = entropy_from_counts(&col_sums, n);
    if h_pred == 0.0 && h_gold == 0.0 {
        return Ok(1.0);
    }
    if h_pred == 0.0 || h_gold == 0.0 {
        return Ok(0.0);
    }

    let mut mi = 0.0;
    for (i, row) in c.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let pij = nij as f64 / n;
                mi += pij * ((n * nij as f64) / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
            }
        }
    }
    // float fuzz can leave MI a hair negative for independent partitions
    let mi = mi.max(0.0);

    let denom = match normalization {
        NmiNormalization::Min => h_pred.min(h_gold),
        NmiNormalization::Geometric => (h_pred * h_gold).sqrt(),
        NmiNormalization::Arithmetic => 0.5 * (h_pred + h_gold),
        NmiNormalization::Max => h_pred.max(h_gold),
    };
    Ok((mi / denom).min(1.0))
}
