//! Pluggable dimensionality reduction ahead of clustering. Identity by
//! default; PCA when a lower working dimension is wanted. Externally
//! reduced vectors can be supplied instead by loading them as embeddings.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMethod {
    #[default]
    Identity,
    Pca,
}

/// A fitted reduction, applicable to any vector of the input dimension.
#[derive(Debug, Clone)]
pub struct Reducer {
    method: ReductionMethod,
    input_dim: usize,
    mean: Vec<f64>,
    /// `target_dim x input_dim` projection (PCA only).
    components: Option<DMatrix<f64>>,
}

impl Reducer {
    pub fn output_dim(&self) -> usize {
        match &self.components {
            Some(c) => c.nrows(),
            None => self.input_dim,
        }
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: v.len(),
                context: "reduction input".into(),
            });
        }
        match &self.components {
            None => Ok(v.to_vec()),
            Some(p) => {
                let centered: DVector<f64> =
                    DVector::from_iterator(v.len(), v.iter().zip(&self.mean).map(|(x, m)| x - m));
                Ok((p * centered).iter().copied().collect())
            }
        }
    }

    pub fn transform_all(&self, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        vectors.iter().map(|v| self.transform(v)).collect()
    }
}

/// Fit a reduction on the given vectors. Deterministic; the seed parameter
/// is reserved for stochastic methods plugged in behind this interface.
pub fn fit_reducer(
    vectors: &[Vec<f64>],
    method: ReductionMethod,
    target_dim: usize,
    _seed: u64,
) -> Result<Reducer> {
    if vectors.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot fit a reduction on zero vectors".into(),
        ));
    }
    let input_dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != input_dim) {
        return Err(Error::Invariant("reduction input dimensions differ".into()));
    }
    if target_dim == 0 || target_dim > input_dim {
        return Err(Error::InvalidParameter(format!(
            "target_dim must be in 1..={input_dim}, got {target_dim}"
        )));
    }
    match method {
        ReductionMethod::Identity => Ok(Reducer {
            method,
            input_dim,
            mean: vec![0.0; input_dim],
            components: None,
        }),
        ReductionMethod::Pca => {
            let n = vectors.len();
            let mut mean = vec![0.0; input_dim];
            for v in vectors {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x / n as f64;
                }
            }
            let mut cov = DMatrix::zeros(input_dim, input_dim);
            let denom = (n.max(2) - 1) as f64;
            for v in vectors {
                let c: DVector<f64> =
                    DVector::from_iterator(input_dim, v.iter().zip(&mean).map(|(x, m)| x - m));
                cov += &c * c.transpose() / denom;
            }
            let eig = nalgebra::SymmetricEigen::new(cov);
            let mut order: Vec<usize> = (0..input_dim).collect();
            order.sort_by(|&a, &b| {
                eig.eigenvalues[b]
                    .partial_cmp(&eig.eigenvalues[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut components = DMatrix::zeros(target_dim, input_dim);
            for (row, &idx) in order.iter().take(target_dim).enumerate() {
                let col = eig.eigenvectors.column(idx);
                // deterministic sign: largest-magnitude entry made positive
                let flip = col
                    .iter()
                    .cloned()
                    .fold((0.0f64, 1.0f64), |(best, sign), x| {
                        if x.abs() > best {
                            (x.abs(), if x < 0.0 { -1.0 } else { 1.0 })
                        } else {
                            (best, sign)
                        }
                    })
                    .1;
                for c in 0..input_dim {
                    components[(row, c)] = flip * col[c];
                }
            }
            Ok(Reducer {
                method,
                input_dim,
                mean,
                components: Some(components),
            })
        }
    }
}

/// One-shot fit-and-transform.
pub fn reduce_dims(
    vectors: &[Vec<f64>],
    method: ReductionMethod,
    target_dim: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    fit_reducer(vectors, method, target_dim, seed)?.transform_all(vectors)
}
