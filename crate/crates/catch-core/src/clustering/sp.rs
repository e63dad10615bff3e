//! Semantic-Preference distance kernel: semantic distance modulated by the
//! reward model's preference scalar.

use serde::{Deserialize, Serialize};

use super::prm::PrmModel;
use super::stages::TopicItem;
use crate::error::{Error, Result};
use crate::vecmath::euclidean;

/// Multiplier floor for the inverted mode, keeping distances positive for
/// strongly linked pairs.
pub const INVERTED_FLOOR: f64 = 0.05;

/// Direction of the preference effect. The literal form multiplies distance
/// by `w` as written; the inverted form multiplies by `1 - w + 0.05` so a
/// high linking tendency shrinks distance, matching the stated intent of the
/// scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpMode {
    PaperLiteral,
    #[default]
    Inverted,
}

/// Fused semantic-preference distance for one pair.
pub fn sp_distance(d_sem: f64, w: f64, mode: SpMode) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!(
            "preference scalar must be in [0,1], got {w}"
        )));
    }
    if d_sem < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "semantic distance must be non-negative, got {d_sem}"
        )));
    }
    Ok(match mode {
        SpMode::PaperLiteral => w * d_sem,
        SpMode::Inverted => (1.0 - w + INVERTED_FLOOR) * d_sem,
    })
}

/// Full pairwise SP distances plus the companion matrix of preference
/// scalars; both symmetric, distances with zero diagonal.
#[derive(Debug, Clone)]
pub struct SpMatrix {
    pub d_sp: Vec<Vec<f64>>,
    pub w_p: Vec<Vec<f64>>,
}

impl SpMatrix {
    pub fn len(&self) -> usize {
        self.d_sp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_sp.is_empty()
    }

    /// Square CSV of the SP distances, row per topic, for debugging.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.d_sp {
            let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Pairwise SP matrix over the items' reduced vectors.
pub fn compute_sp_matrix(items: &[TopicItem], model: &PrmModel, mode: SpMode) -> Result<SpMatrix> {
    if !model.is_trained() {
        return Err(Error::InvalidParameter(
            "SP matrix requires a trained preference reward model".into(),
        ));
    }
    let vectors: Vec<&[f64]> = items
        .iter()
        .map(|item| {
            item.reduced.as_deref().ok_or_else(|| {
                Error::Invariant(format!("topic `{}` has no reduced vector", item.key))
            })
        })
        .collect::<Result<_>>()?;
    let n = items.len();
    let mut d_sp = vec![vec![0.0; n]; n];
    let mut w_p = vec![vec![0.0; n]; n];
    for i in 0..n {
        w_p[i][i] = model.score(vectors[i], vectors[i])?;
        for j in (i + 1)..n {
            let w = model.score(vectors[i], vectors[j])?;
            let d = sp_distance(euclidean(vectors[i], vectors[j]), w, mode)?;
            w_p[i][j] = w;
            w_p[j][i] = w;
            d_sp[i][j] = d;
            d_sp[j][i] = d;
        }
    }
    Ok(SpMatrix { d_sp, w_p })
}
