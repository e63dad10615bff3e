//! Two-stage head adaptation: conversation-level batches over every
//! utterance, then utterance-level batches anchored on theme-annotated
//! turns, trained by plain gradient descent on the combined objective.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::head::{HeadKind, ProjectionHead};
use super::loss::{combined_loss_and_grads, ContrastiveBatch, PairBatch};
use crate::corpus::Corpus;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdaptConfig {
    pub margin: f64,
    /// Positive window: utterances within `window` turns of the anchor.
    pub window: usize,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Projection output dimension; defaults to the embedding dimension.
    pub projection_dim: Option<usize>,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            margin: 0.1,
            window: 2,
            negatives_per_positive: 3,
            learning_rate: 5e-6,
            epochs: 3,
            projection_dim: None,
            seed: 0,
        }
    }
}

/// Per-epoch losses for both stages. Non-increasing epoch means are
/// reported, not enforced.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub stage1: Vec<f64>,
    pub stage2: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrainingLog {
    pub fn is_non_increasing(&self) -> bool {
        let ok = |xs: &[f64]| xs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        ok(&self.stage1) && ok(&self.stage2)
    }
}

fn sample_without_replacement<T: Clone>(
    pool: &[T],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<T> {
    if pool.len() <= count {
        return pool.to_vec();
    }
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    indices.shuffle(rng);
    indices.truncate(count);
    indices.into_iter().map(|i| pool[i].clone()).collect()
}

/// Build topic and pair batches for one stage. With `targets_only`, anchors
/// are restricted to theme-annotated utterances (and, for pair batches, to
/// adjacent pairs touching one).
pub(crate) fn build_batches(
    corpus: &Corpus,
    targets_only: bool,
    cfg: &AdaptConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<ContrastiveBatch>, Vec<PairBatch>) {
    let mut u_batches = Vec::new();
    let mut p_batches = Vec::new();

    // adjacent pairs of every other dialogue, for pair negatives
    let all_pairs: Vec<(usize, (String, String))> = corpus
        .dialogues()
        .iter()
        .enumerate()
        .flat_map(|(di, d)| {
            d.turns.windows(2).map(move |w| (di, (w[0].key(), w[1].key())))
        })
        .collect();

    for (di, d) in corpus.dialogues().iter().enumerate() {
        let n = d.len();
        for i in 0..n {
            if targets_only && !d.turns[i].is_target {
                continue;
            }
            let positives: Vec<String> = (i.saturating_sub(cfg.window)..=(i + cfg.window).min(n - 1))
                .filter(|&j| j != i)
                .map(|j| d.turns[j].key())
                .collect();
            if positives.is_empty() {
                continue;
            }
            let mut pool: Vec<String> = (0..n)
                .filter(|&j| j + cfg.window < i || j > i + cfg.window)
                .map(|j| d.turns[j].key())
                .collect();
            if pool.is_empty() {
                // fall back to utterances of other dialogues
                pool = corpus
                    .dialogues()
                    .iter()
                    .filter(|other| other.dialogue_id != d.dialogue_id)
                    .flat_map(|other| other.turns.iter().map(|u| u.key()))
                    .collect();
            }
            if pool.is_empty() {
                continue;
            }
            let want = cfg.negatives_per_positive.max(1) * positives.len();
            let negatives = sample_without_replacement(&pool, want, rng);
            if let Ok(b) =
                ContrastiveBatch::new(d.turns[i].key(), positives, negatives, cfg.margin)
            {
                u_batches.push(b);
            }

            // pair batch anchored at (i, i+1)
            if i + 1 < n {
                if targets_only && !(d.turns[i].is_target || d.turns[i + 1].is_target) {
                    continue;
                }
                let anchor = (d.turns[i].key(), d.turns[i + 1].key());
                let mut positives: Vec<(String, String)> = Vec::new();
                if i >= 1 {
                    positives.push((d.turns[i - 1].key(), d.turns[i].key()));
                }
                if i + 2 < n {
                    positives.push((d.turns[i + 1].key(), d.turns[i + 2].key()));
                }
                if positives.is_empty() {
                    continue;
                }
                let pair_pool: Vec<(String, String)> = all_pairs
                    .iter()
                    .filter(|(pdi, _)| *pdi != di)
                    .map(|(_, p)| p.clone())
                    .collect();
                if pair_pool.is_empty() {
                    continue;
                }
                let want = cfg.negatives_per_positive.max(1) * positives.len();
                let negatives = sample_without_replacement(&pair_pool, want, rng);
                if let Ok(b) = PairBatch::new(anchor, positives, negatives, cfg.margin) {
                    p_batches.push(b);
                }
            }
        }
    }
    (u_batches, p_batches)
}

fn train_stage(
    stage: &str,
    u_batches: &[ContrastiveBatch],
    p_batches: &[PairBatch],
    topic: &mut ProjectionHead,
    coherence: &mut ProjectionHead,
    store: &EmbeddingStore,
    cfg: &AdaptConfig,
    losses: &mut Vec<f64>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    if u_batches.is_empty() && p_batches.is_empty() {
        warnings.push(format!("{stage}: no trainable batches, stage skipped"));
        return Ok(());
    }
    if u_batches.is_empty() {
        warnings.push(format!("{stage}: no utterance batches, training on pair loss only"));
    }
    if p_batches.is_empty() {
        warnings.push(format!("{stage}: no pair batches, training on utterance loss only"));
    }
    for _ in 0..cfg.epochs {
        let (loss, grad_t, grad_c) =
            combined_loss_and_grads(u_batches, p_batches, topic, coherence, store)?;
        losses.push(loss);
        topic.apply_gradient(&grad_t, cfg.learning_rate);
        coherence.apply_gradient(&grad_c, cfg.learning_rate);
    }
    Ok(())
}

/// Train both heads. Stage 1 anchors on every utterance; stage 2 anchors on
/// theme-annotated utterances only and is skipped with a warning when the
/// corpus has none. With zero epochs the heads equal their identity-padded
/// initialization.
pub fn adapt(
    corpus: &Corpus,
    store: &EmbeddingStore,
    cfg: &AdaptConfig,
) -> Result<(ProjectionHead, ProjectionHead, TrainingLog)> {
    let d_in = store.dim().ok_or_else(|| {
        Error::InvalidParameter("cannot adapt heads over an empty embedding store".into())
    })?;
    let d_out = cfg.projection_dim.unwrap_or(d_in);
    let mut topic = ProjectionHead::identity(HeadKind::Topic, d_in, d_out)?;
    let mut coherence = ProjectionHead::identity(HeadKind::Coherence, d_in, d_out)?;
    let mut log = TrainingLog::default();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (u1, p1) = build_batches(corpus, false, cfg, &mut rng);
    train_stage(
        "stage 1",
        &u1,
        &p1,
        &mut topic,
        &mut coherence,
        store,
        cfg,
        &mut log.stage1,
        &mut log.warnings,
    )?;

    if corpus.target_utterances().next().is_none() {
        log.warnings
            .push("stage 2 skipped: corpus has no target utterances".into());
    } else {
        let mut rng2 = ChaCha8Rng::seed_from_u64(cfg.seed ^ rng.next_u64());
        let (u2, p2) = build_batches(corpus, true, cfg, &mut rng2);
        train_stage(
            "stage 2",
            &u2,
            &p2,
            &mut topic,
            &mut coherence,
            store,
            cfg,
            &mut log.stage2,
            &mut log.warnings,
        )?;
    }

    for w in &log.warnings {
        log::warn!("{w}");
    }
    Ok((topic, coherence, log))
}
