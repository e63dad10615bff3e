//! Margin-based contrastive objectives for the two projection heads, with
//! analytic gradients for plain gradient-descent training.
//!
//! The topic loss pulls an anchor utterance toward in-window neighbors and
//! away from out-of-window samples. The pair loss does the same for adjacent
//! utterance pairs against pairs from other dialogues, on a relevance score
//! that combines mean-topic similarity with the anchor pair's coherence.

use nalgebra::{DMatrix, DVector};

use super::head::ProjectionHead;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};

/// Anchor utterance with positive and negative sample keys.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch {
    pub anchor: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
    pub margin: f64,
}

impl ContrastiveBatch {
    pub fn new(
        anchor: String,
        positives: Vec<String>,
        negatives: Vec<String>,
        margin: f64,
    ) -> Result<Self> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::InvalidParameter(
                "contrastive batch requires non-empty positives and negatives".into(),
            ));
        }
        if margin <= 0.0 {
            return Err(Error::InvalidParameter("margin must be positive".into()));
        }
        if positives.iter().any(|p| negatives.contains(p)) {
            return Err(Error::InvalidParameter(
                "positives and negatives must be disjoint".into(),
            ));
        }
        Ok(ContrastiveBatch {
            anchor,
            positives,
            negatives,
            margin,
        })
    }
}

/// Anchor utterance pair with positive and negative pairs.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pub anchor: (String, String),
    pub positives: Vec<(String, String)>,
    pub negatives: Vec<(String, String)>,
    pub margin: f64,
}

impl PairBatch {
    pub fn new(
        anchor: (String, String),
        positives: Vec<(String, String)>,
        negatives: Vec<(String, String)>,
        margin: f64,
    ) -> Result<Self> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::InvalidParameter(
                "pair batch requires non-empty positive and negative pairs".into(),
            ));
        }
        if margin <= 0.0 {
            return Err(Error::InvalidParameter("margin must be positive".into()));
        }
        if positives.iter().any(|p| negatives.contains(p)) {
            return Err(Error::InvalidParameter(
                "positive and negative pairs must be disjoint".into(),
            ));
        }
        Ok(PairBatch {
            anchor,
            positives,
            negatives,
            margin,
        })
    }
}

fn project_raw(w: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != w.ncols() {
        return Err(Error::DimensionMismatch {
            expected: w.ncols(),
            found: x.len(),
            context: "loss projection".into(),
        });
    }
    Ok(w * DVector::from_column_slice(x))
}

/// Cosine of the projections `Wx`, `Wy` and its gradient with respect to W.
fn cos_with_grad(w: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Result<(f64, DMatrix<f64>)> {
    let s = project_raw(w, x)?;
    let t = project_raw(w, y)?;
    let (ns, nt) = (s.norm(), t.norm());
    if ns == 0.0 || nt == 0.0 {
        return Err(Error::ZeroNorm("projected vector in loss".into()));
    }
    let e = s.dot(&t) / (ns * nt);
    let de_ds = &t / (ns * nt) - &s * (e / (ns * ns));
    let de_dt = &s / (ns * nt) - &t * (e / (nt * nt));
    let grad = de_ds * DVector::from_column_slice(x).transpose()
        + de_dt * DVector::from_column_slice(y).transpose();
    Ok((e, grad))
}

/// Topic contrastive loss for one batch:
/// sum over (u+, u-) of max(0, margin + e- - e+), where e is the cosine of
/// the projected anchor with the projected sample. Returns the loss and its
/// gradient with respect to the topic head weights.
pub fn topic_contrastive_loss(
    batch: &ContrastiveBatch,
    topic_head: &ProjectionHead,
    store: &EmbeddingStore,
) -> Result<(f64, DMatrix<f64>)> {
    let w = topic_head.weight();
    let anchor = store.require(&batch.anchor)?;
    let pos: Vec<(f64, DMatrix<f64>)> = batch
        .positives
        .iter()
        .map(|k| cos_with_grad(w, anchor, store.require(k)?))
        .collect::<Result<_>>()?;
    let neg: Vec<(f64, DMatrix<f64>)> = batch
        .negatives
        .iter()
        .map(|k| cos_with_grad(w, anchor, store.require(k)?))
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(w.nrows(), w.ncols());
    for (ep, gp) in &pos {
        for (en, gn) in &neg {
            let term = batch.margin + en - ep;
            if term > 0.0 {
                loss += term;
                grad += gn;
                grad -= gp;
            }
        }
    }
    Ok((loss, grad))
}

struct ProjectedPair {
    h_sum: DVector<f64>, // h_a + h_b (unit projections summed; mean differs by a constant factor)
    hats: [(DVector<f64>, f64); 2],
    raw: [Vec<f64>; 2],
}

fn project_pair(w: &DMatrix<f64>, a: &[f64], b: &[f64]) -> Result<ProjectedPair> {
    let mut hats = Vec::with_capacity(2);
    for x in [a, b] {
        let s = project_raw(w, x)?;
        let n = s.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm("projected vector in pair loss".into()));
        }
        hats.push((&s / n, n));
    }
    let h_sum = &hats[0].0 + &hats[1].0;
    let [h0, h1] = <[(DVector<f64>, f64); 2]>::try_from(hats).expect("two projections");
    Ok(ProjectedPair {
        h_sum,
        hats: [h0, h1],
        raw: [a.to_vec(), b.to_vec()],
    })
}

/// Cosine between the mean topic projections of two utterance pairs, with
/// its gradient; the mean's 1/2 factors cancel inside the cosine but not in
/// the chain rule, which runs through each unit projection.
fn mean_cos_with_grad(
    w: &DMatrix<f64>,
    anchor: &ProjectedPair,
    other: &ProjectedPair,
) -> Result<(f64, DMatrix<f64>)> {
    let ma = &anchor.h_sum;
    let mq = &other.h_sum;
    let (na, nq) = (ma.norm(), mq.norm());
    if na == 0.0 || nq == 0.0 {
        return Err(Error::ZeroNorm("mean pair representation".into()));
    }
    let g = ma.dot(mq) / (na * nq);
    let dg_dma = mq / (na * nq) - ma * (g / (na * na));
    let dg_dmq = ma / (na * nq) - mq * (g / (nq * nq));

    let mut grad = DMatrix::zeros(w.nrows(), w.ncols());
    for (pair, dg_dm) in [(anchor, &dg_dma), (other, &dg_dmq)] {
        for ((hat, norm), raw) in pair.hats.iter().zip(&pair.raw) {
            // d h / d s = (I - hh^T)/|s|, applied to dg/dm (the h_sum has
            // unit weight per member, the mean scaling cancels in cosine)
            let through = (dg_dm - hat * hat.dot(dg_dm)) / *norm;
            grad += through * DVector::from_column_slice(raw).transpose();
        }
    }
    Ok((g, grad))
}

/// Pair contrastive loss for one batch: sum over (P+, P-) of
/// max(0, margin + r- - r+) with r = mean-topic similarity + the anchor
/// pair's coherence. Returns the loss and gradients for both heads.
///
/// The anchor coherence enters r+ and r- identically and cancels inside the
/// hinge, so the coherence-head gradient is structurally zero.
pub fn pair_contrastive_loss(
    batch: &PairBatch,
    topic_head: &ProjectionHead,
    coherence_head: &ProjectionHead,
    store: &EmbeddingStore,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let wt = topic_head.weight();
    let anchor_a = store.require(&batch.anchor.0)?.to_vec();
    let anchor_b = store.require(&batch.anchor.1)?.to_vec();
    let anchor = project_pair(wt, &anchor_a, &anchor_b)?;

    // anchor coherence c_i, constant across compared pairs
    let ca = {
        let wc = coherence_head.weight();
        let (c, _) = cos_with_grad(wc, &anchor_a, &anchor_b)?;
        c
    };

    let eval = |pairs: &[(String, String)]| -> Result<Vec<(f64, DMatrix<f64>)>> {
        pairs
            .iter()
            .map(|(u, v)| {
                let p = project_pair(wt, store.require(u)?, store.require(v)?)?;
                mean_cos_with_grad(wt, &anchor, &p)
            })
            .collect()
    };
    let pos = eval(&batch.positives)?;
    let neg = eval(&batch.negatives)?;

    let mut loss = 0.0;
    let mut grad_t = DMatrix::zeros(wt.nrows(), wt.ncols());
    for (sp, gp) in &pos {
        let rp = sp + ca;
        for (sn, gn) in &neg {
            let rn = sn + ca;
            let term = batch.margin + rn - rp;
            if term > 0.0 {
                loss += term;
                grad_t += gn;
                grad_t -= gp;
            }
        }
    }
    let grad_c = DMatrix::zeros(
        coherence_head.weight().nrows(),
        coherence_head.weight().ncols(),
    );
    Ok((loss, grad_t, grad_c))
}

/// Combined objective: mean of the topic-batch losses plus mean of the
/// pair-batch losses.
pub fn combined_loss(
    u_batches: &[ContrastiveBatch],
    p_batches: &[PairBatch],
    topic_head: &ProjectionHead,
    coherence_head: &ProjectionHead,
    store: &EmbeddingStore,
) -> Result<f64> {
    if u_batches.is_empty() || p_batches.is_empty() {
        return Err(Error::InvalidParameter(
            "combined loss requires at least one batch of each kind".into(),
        ));
    }
    let (loss, _, _) =
        combined_loss_and_grads(u_batches, p_batches, topic_head, coherence_head, store)?;
    Ok(loss)
}

/// Loss plus accumulated gradients, with the same 1/N and 1/M scaling.
/// Either batch family may be empty here; its term is simply absent.
pub(crate) fn combined_loss_and_grads(
    u_batches: &[ContrastiveBatch],
    p_batches: &[PairBatch],
    topic_head: &ProjectionHead,
    coherence_head: &ProjectionHead,
    store: &EmbeddingStore,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let wt = topic_head.weight();
    let wc = coherence_head.weight();
    let mut loss = 0.0;
    let mut grad_t = DMatrix::zeros(wt.nrows(), wt.ncols());
    let mut grad_c = DMatrix::zeros(wc.nrows(), wc.ncols());

    if !u_batches.is_empty() {
        let scale = 1.0 / u_batches.len() as f64;
        for b in u_batches {
            let (l, g) = topic_contrastive_loss(b, topic_head, store)?;
            loss += scale * l;
            grad_t += g * scale;
        }
    }
    if !p_batches.is_empty() {
        let scale = 1.0 / p_batches.len() as f64;
        for b in p_batches {
            let (l, gt, gc) = pair_contrastive_loss(b, topic_head, coherence_head, store)?;
            loss += scale * l;
            grad_t += gt * scale;
            grad_c += gc * scale;
        }
    }
    Ok((loss, grad_t, grad_c))
}
