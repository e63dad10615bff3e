//! Seeded spectral clustering: k-NN Gaussian affinity, symmetric-normalized
//! Laplacian, bottom-K eigenvectors, row normalization, k-means++.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stages::{ClusterAssignment, Stage};
use crate::error::{Error, Result};
use crate::vecmath::euclidean;

fn pairwise_distances(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = euclidean(&vectors[i], &vectors[j]);
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    d
}

fn median_offdiagonal(d: &[Vec<f64>]) -> f64 {
    let n = d.len();
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            all.push(d[i][j]);
        }
    }
    if all.is_empty() {
        return 1.0;
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = all[all.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Cluster points given a precomputed distance matrix.
pub(crate) fn spectral_cluster_distances(
    distances: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = distances.len();
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InvalidParameter(format!(
            "cannot form K={k} clusters from {n} items"
        )));
    }
    if n == k {
        return Ok((0..n).collect());
    }

    // k-NN Gaussian affinity with median-distance bandwidth
    let knn = 10.min(n - 1);
    let sigma = median_offdiagonal(distances);
    let mut affinity = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            distances[i][a]
                .partial_cmp(&distances[i][b])
                .unwrap()
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(knn) {
            let w = (-distances[i][j] * distances[i][j] / (2.0 * sigma * sigma)).exp();
            // union symmetrization: an edge if either endpoint selects it
            affinity[(i, j)] = w;
            affinity[(j, i)] = w;
        }
    }

    // symmetric-normalized Laplacian L = I - D^-1/2 A D^-1/2
    let degrees: Vec<f64> = (0..n).map(|i| affinity.row(i).sum()).collect();
    let mut lap: DMatrix<f64> = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if affinity[(i, j)] != 0.0 {
                lap[(i, j)] -= affinity[(i, j)] / (degrees[i] * degrees[j]).sqrt();
            }
        }
    }

    let eig = nalgebra::SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            order
                .iter()
                .take(k)
                .map(|&col| eig.eigenvectors[(i, col)])
                .collect()
        })
        .collect();
    for row in &mut rows {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(kmeans(&rows, k, &mut rng))
}

/// Cluster vectors into K groups; deterministic given the seed.
pub fn spectral_cluster(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterAssignment> {
    let labels = spectral_cluster_distances(&pairwise_distances(vectors), k, seed)?;
    Ok(ClusterAssignment::new(labels, Stage::S1))
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = euclidean(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded
/// with the point farthest from its centroid. Ties break toward the lower
/// index everywhere.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                let d = euclidean(p, &centroids[nearest(p, &centroids)]);
                d * d
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // all remaining points coincide with a centroid
            (0..n).find(|&i| d2[i] == 0.0).unwrap_or(0)
        };
        centroids.push(points[idx].clone());
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(p, &centroids);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        // recompute centroids
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, x) in sums[assignment[i]].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed with the point farthest from its current centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        euclidean(&points[a], &centroids[assignment[a]])
                            .partial_cmp(&euclidean(&points[b], &centroids[assignment[b]]))
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                assignment[far] = c;
                changed = true;
            } else {
                for (d, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *d = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    assignment
}
