//! Preference reward model: a logistic regressor over symmetric pair
//! features predicting the linking tendency of a topic pair in [0, 1].

use serde::{Deserialize, Serialize};

use crate::corpus::{relation_counts, PreferencePair};
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::vecmath;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrmConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for PrmConfig {
    fn default() -> Self {
        PrmConfig {
            learning_rate: 2e-5,
            epochs: 3,
        }
    }
}

/// Symmetric featurization: elementwise |a-b|, elementwise a*b, and the
/// cosine of the pair, concatenated.
pub fn pair_features(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * a.len() + 1);
    out.extend(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    out.push(vecmath::cosine(a, b));
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Affine map over pair features followed by a logistic squashing. The
/// zero-initialized model scores every pair exactly 0.5.
#[derive(Debug, Clone)]
pub struct PrmModel {
    weights: Vec<f64>,
    bias: f64,
    input_dim: usize,
    trained: bool,
}

impl PrmModel {
    pub fn untrained(input_dim: usize) -> Self {
        PrmModel {
            weights: vec![0.0; 2 * input_dim + 1],
            bias: 0.0,
            input_dim,
            trained: false,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Preference scalar in [0, 1]; symmetric in its arguments.
    pub fn score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim || y.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len().max(y.len()),
                context: "PRM input".into(),
            });
        }
        let phi = pair_features(x, y);
        Ok(sigmoid(vecmath::dot(&self.weights, &phi) + self.bias))
    }
}

/// Free-function form of [`PrmModel::score`].
pub fn prm_score(model: &PrmModel, x: &[f64], y: &[f64]) -> Result<f64> {
    model.score(x, y)
}

/// Mean squared error over the training pairs plus its gradient.
pub(crate) fn prm_loss_and_grad(
    weights: &[f64],
    bias: f64,
    data: &[(Vec<f64>, f64)],
) -> (f64, Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (phi, y) in data {
        let w = sigmoid(vecmath::dot(weights, phi) + bias);
        let err = w - y;
        loss += err * err / n;
        let factor = 2.0 * err * w * (1.0 - w) / n;
        for (g, f) in grad_w.iter_mut().zip(phi) {
            *g += factor * f;
        }
        grad_b += factor;
    }
    (loss, grad_w, grad_b)
}

/// Train on explicit vector pairs; `targets` are 1 for should-link, 0 for
/// cannot-link.
pub fn train_prm_on_vectors(
    data: &[(Vec<f64>, Vec<f64>, f64)],
    input_dim: usize,
    cfg: &PrmConfig,
) -> Result<PrmModel> {
    if data.is_empty() {
        return Err(Error::InvalidParameter(
            "PRM training requires at least one preference pair".into(),
        ));
    }
    let distinct: std::collections::BTreeSet<u64> =
        data.iter().map(|(_, _, y)| y.to_bits()).collect();
    if distinct.len() < 2 {
        log::warn!("PRM training set carries a single relation; model will be degenerate");
    }
    let features: Vec<(Vec<f64>, f64)> = data
        .iter()
        .map(|(a, b, y)| {
            if a.len() != input_dim || b.len() != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim,
                    found: a.len().max(b.len()),
                    context: "PRM training pair".into(),
                });
            }
            Ok((pair_features(a, b), *y))
        })
        .collect::<Result<_>>()?;

    let mut model = PrmModel::untrained(input_dim);
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = prm_loss_and_grad(&model.weights, model.bias, &features);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * g;
        }
        model.bias -= cfg.learning_rate * gb;
    }
    model.trained = cfg.epochs > 0;
    Ok(model)
}

/// Train from preference annotations, resolving endpoints in `store`.
pub fn train_prm(
    pairs: &[PreferencePair],
    store: &EmbeddingStore,
    cfg: &PrmConfig,
) -> Result<PrmModel> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "PRM training requires at least one preference pair".into(),
        ));
    }
    let dim = store.dim().ok_or_else(|| {
        Error::InvalidParameter("cannot train PRM over an empty embedding store".into())
    })?;
    let (should, cannot) = relation_counts(pairs);
    log::info!("training PRM on {should} should-link / {cannot} cannot-link pairs");
    let data: Vec<(Vec<f64>, Vec<f64>, f64)> = pairs
        .iter()
        .map(|p| {
            Ok((
                store.require(&p.a.key())?.to_vec(),
                store.require(&p.b.key())?.to_vec(),
                p.target(),
            ))
        })
        .collect::<Result<_>>()?;
    train_prm_on_vectors(&data, dim, cfg)
}
