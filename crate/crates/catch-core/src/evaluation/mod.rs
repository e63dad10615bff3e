//! Offline metric suite and the FCC perturbation harness.

mod hungarian;
mod nmi;
mod rouge;

pub use hungarian::{clustering_accuracy, hungarian_min};
pub use nmi::{nmi, NmiNormalization};
pub use rouge::{rouge_scores, tokenize, RougeScores};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::vecmath;

/// Aggregated run metrics, serialized as the report artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub cos_sim: f64,
    /// Reserved for an externally injected LLM judge score.
    pub llm_score: Option<f64>,
    pub n_utterances: usize,
    pub n_clusters_pred: usize,
    pub n_clusters_gold: usize,
}

/// Cosine similarity between two labels' stored embeddings.
pub fn label_cos_sim(candidate: &str, reference: &str, store: &EmbeddingStore) -> Result<f64> {
    let c = store
        .get(candidate)
        .ok_or_else(|| Error::MissingEmbedding(format!("label `{candidate}`")))?;
    let r = store
        .get(reference)
        .ok_or_else(|| Error::MissingEmbedding(format!("label `{reference}`")))?;
    Ok(vecmath::cosine(c, r))
}

/// Predicted side of a run: utterance-to-cluster assignment plus the theme
/// generated for each cluster.
#[derive(Debug, Clone, Default)]
pub struct PredRun {
    pub assignment: BTreeMap<String, usize>,
    pub themes: BTreeMap<usize, String>,
}

/// Gold side: target utterance key to annotated theme.
#[derive(Debug, Clone, Default)]
pub struct GoldRun {
    pub themes: BTreeMap<String, String>,
}

/// Score a full run. Clustering metrics are computed over the gold target
/// utterances; ROUGE and cosine similarity are averaged per utterance, each
/// scored against its cluster's generated theme versus its gold theme.
pub fn evaluate_run(
    pred: &PredRun,
    gold: &GoldRun,
    label_store: &EmbeddingStore,
    normalization: NmiNormalization,
) -> Result<MetricReport> {
    if gold.themes.is_empty() {
        return Err(Error::Invariant("no gold-annotated target utterances".into()));
    }
    let missing: Vec<String> = gold
        .themes
        .keys()
        .filter(|k| !pred.assignment.contains_key(*k))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }

    let gold_ids: BTreeMap<&String, usize> = {
        let themes: BTreeSet<&String> = gold.themes.values().collect();
        themes.into_iter().zip(0..).collect()
    };

    let mut pred_labels = Vec::with_capacity(gold.themes.len());
    let mut gold_labels = Vec::with_capacity(gold.themes.len());
    let mut rouge1 = 0.0;
    let mut rouge2 = 0.0;
    let mut rouge_l = 0.0;
    let mut cos = 0.0;
    for (key, gold_theme) in &gold.themes {
        let cluster = pred.assignment[key];
        let pred_theme = pred.themes.get(&cluster).ok_or_else(|| {
            Error::Invariant(format!("no theme generated for cluster {cluster}"))
        })?;
        pred_labels.push(cluster);
        gold_labels.push(gold_ids[gold_theme]);
        let r = rouge_scores(pred_theme, gold_theme);
        rouge1 += r.rouge1;
        rouge2 += r.rouge2;
        rouge_l += r.rouge_l;
        cos += label_cos_sim(pred_theme, gold_theme, label_store)?;
    }

    let n = gold.themes.len() as f64;
    let distinct_pred: BTreeSet<usize> = pred_labels.iter().copied().collect();
    Ok(MetricReport {
        acc: clustering_accuracy(&pred_labels, &gold_labels)?,
        nmi: nmi(&pred_labels, &gold_labels, normalization)?,
        rouge1: rouge1 / n,
        rouge2: rouge2 / n,
        rouge_l: rouge_l / n,
        cos_sim: cos / n,
        llm_score: None,
        n_utterances: gold.themes.len(),
        n_clusters_pred: distinct_pred.len(),
        n_clusters_gold: gold_ids.len(),
    })
}

/// Corrupt an assignment so that a fraction `f` of items keeps its gold
/// cluster: exactly `round((1 - f) * n)` items are moved to a uniformly
/// chosen different cluster.
pub fn fcc_perturb(gold: &[usize], f: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidParameter(format!(
            "fraction must be in [0,1], got {f}"
        )));
    }
    let clusters: BTreeSet<usize> = gold.iter().copied().collect();
    if clusters.len() < 2 && f < 1.0 {
        return Err(Error::InvalidParameter(
            "cannot perturb a single-cluster assignment: no different cluster exists".into(),
        ));
    }
    let n = gold.len();
    let moves = ((1.0 - f) * n as f64).round() as usize;
    let mut out = gold.to_vec();
    if moves == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let cluster_ids: Vec<usize> = clusters.into_iter().collect();
    for &i in indices.iter().take(moves) {
        let others: Vec<usize> = cluster_ids
            .iter()
            .copied()
            .filter(|&c| c != gold[i])
            .collect();
        out[i] = others[rng.gen_range(0..others.len())];
    }
    Ok(out)
}
