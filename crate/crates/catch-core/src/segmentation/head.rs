//! Trainable linear projection heads standing in for the topic and
//! coherence encoders. A head maps a raw embedding `e` to the unit vector
//! `normalize(W e)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::vecmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Topic,
    Coherence,
}

#[derive(Debug, Clone)]
pub struct ProjectionHead {
    kind: HeadKind,
    /// `d_out x d_in`
    weight: DMatrix<f64>,
}

impl ProjectionHead {
    /// Identity-padded initialization: the leading `d_out` rows of the
    /// identity, so a zero-epoch run degenerates to raw-embedding cosine.
    pub fn identity(kind: HeadKind, d_in: usize, d_out: usize) -> Result<Self> {
        if d_out == 0 || d_out > d_in {
            return Err(Error::InvalidParameter(format!(
                "projection dims must satisfy 0 < d_out <= d_in, got {d_out} x {d_in}"
            )));
        }
        let weight = DMatrix::from_fn(d_out, d_in, |r, c| if r == c { 1.0 } else { 0.0 });
        Ok(ProjectionHead { kind, weight })
    }

    pub fn from_matrix(kind: HeadKind, weight: DMatrix<f64>) -> Result<Self> {
        if weight.nrows() == 0 || weight.nrows() > weight.ncols() {
            return Err(Error::InvalidParameter(format!(
                "projection dims must satisfy 0 < d_out <= d_in, got {} x {}",
                weight.nrows(),
                weight.ncols()
            )));
        }
        if weight.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant(
                "projection head contains a non-finite weight".into(),
            ));
        }
        Ok(ProjectionHead { kind, weight })
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// `normalize(W e)`.
    pub fn project(&self, e: &[f64]) -> Result<Vec<f64>> {
        if e.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: e.len(),
                context: "projection head input".into(),
            });
        }
        let mut out = vec![0.0; self.output_dim()];
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.weight.row(r).iter().zip(e).map(|(w, x)| w * x).sum();
        }
        vecmath::normalized(&out, "projected embedding")
    }

    /// Gradient-descent update `W -= lr * grad`.
    pub(crate) fn apply_gradient(&mut self, grad: &DMatrix<f64>, learning_rate: f64) {
        self.weight -= grad * learning_rate;
    }
}
