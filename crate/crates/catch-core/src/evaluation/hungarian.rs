//! Clustering accuracy under the optimal cluster-to-label matching.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Minimum-cost assignment on a square cost matrix; returns `assign[row] = col`.
///
/// Potentials formulation of the Hungarian algorithm, O(n^3). Costs may be
/// any finite reals.
pub fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));

    const UNSET: usize = usize::MAX;
    // 1-indexed workspaces; p[j] = row matched to column j
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![UNSET; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    if p[j] != UNSET {
                        u[p[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == UNSET {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![UNSET; n];
    for j in 1..=n {
        if p[j] != UNSET {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Relabel arbitrary cluster ids to dense 0-based ids, preserving first-seen
/// order is not required; uses sorted id order for determinism.
pub(crate) fn densify(labels: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let lookup: BTreeMap<usize, usize> = ids.into_iter().zip(0..).collect();
    labels.iter().map(|l| lookup[l]).collect()
}

/// Contingency counts `c[pred][gold]` over dense relabelings.
pub(crate) fn contingency(pred: &[usize], gold: &[usize]) -> Vec<Vec<usize>> {
    let p = densify(pred);
    let g = densify(gold);
    let np = p.iter().max().map_or(0, |m| m + 1);
    let ng = g.iter().max().map_or(0, |m| m + 1);
    let mut c = vec![vec![0usize; ng]; np];
    for (&pi, &gi) in p.iter().zip(&g) {
        c[pi][gi] += 1;
    }
    c
}

/// Fraction of items covered by the best one-to-one cluster-to-label
/// matching, computed by Hungarian assignment on the (zero-padded)
/// contingency matrix.
pub fn clustering_accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
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
    let side = c.len().max(c[0].len());
    let mut cost = vec![vec![0.0f64; side]; side];
    for (i, row) in c.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            cost[i][j] = -(count as f64);
        }
    }
    let assign = hungarian_min(&cost);
    let matched: usize = c
        .iter()
        .enumerate()
        .map(|(i, row)| row.get(assign[i]).copied().unwrap_or(0))
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}
