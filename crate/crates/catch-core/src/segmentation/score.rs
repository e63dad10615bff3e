//! Boundary scores over adjacent utterance pairs: r_i = t_i + c_i, the sum
//! of topic similarity and coherence under the two projection heads.

use super::head::ProjectionHead;
use crate::corpus::Dialogue;
use crate::embedding::EmbeddingStore;
use crate::error::Result;
use crate::vecmath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryScore {
    /// Gap index: the score between turns `index` and `index + 1`.
    pub index: usize,
    pub topic_sim: f64,
    pub coherence: f64,
    pub total: f64,
}

/// One score per adjacent pair; n turns yield n-1 scores.
pub fn boundary_scores(
    dialogue: &Dialogue,
    store: &EmbeddingStore,
    topic_head: &ProjectionHead,
    coherence_head: &ProjectionHead,
) -> Result<Vec<BoundaryScore>> {
    let projected: Vec<(Vec<f64>, Vec<f64>)> = dialogue
        .turns
        .iter()
        .map(|u| {
            let e = store.require(&u.key())?;
            Ok((topic_head.project(e)?, coherence_head.project(e)?))
        })
        .collect::<Result<_>>()?;

    Ok(projected
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            // projections are unit vectors, so dot product is cosine
            let topic_sim = vecmath::dot(&w[0].0, &w[1].0);
            let coherence = vecmath::dot(&w[0].1, &w[1].1);
            BoundaryScore {
                index: i,
                topic_sim,
                coherence,
                total: topic_sim + coherence,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use crate::embedding::EmbeddingStore;
    use crate::segmentation::head::HeadKind;

    fn dialogue(n: usize) -> Dialogue {
        let turns: Vec<String> = (0..n)
            .map(|i| {
                format!(
                    r#"{{"turn_index":{i},"speaker":"u","text":"t{i}","is_target":false,"theme":null}}"#
                )
            })
            .collect();
        let line = format!(r#"{{"dialogue_id":"d","turns":[{}]}}"#, turns.join(","));
        parse_corpus(&line, "fixture").unwrap().dialogues()[0].clone()
    }

    fn store(vectors: &[Vec<f64>]) -> EmbeddingStore {
        EmbeddingStore::from_entries(
            vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("d:{i}"), v.clone())),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identical_embeddings_score_two() {
        let d = dialogue(2);
        let s = store(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let topic = ProjectionHead::identity(HeadKind::Topic, 2, 2).unwrap();
        let coh = ProjectionHead::identity(HeadKind::Coherence, 2, 2).unwrap();
        let scores = boundary_scores(&d, &s, &topic, &coh).unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].topic_sim, 1.0);
        assert_eq!(scores[0].coherence, 1.0);
        assert_eq!(scores[0].total, 2.0);
    }

    #[test]
    fn orthogonal_embeddings_score_zero() {
        let d = dialogue(2);
        let s = store(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let topic = ProjectionHead::identity(HeadKind::Topic, 2, 2).unwrap();
        let coh = ProjectionHead::identity(HeadKind::Coherence, 2, 2).unwrap();
        let scores = boundary_scores(&d, &s, &topic, &coh).unwrap();
        assert_eq!(scores[0].total, 0.0);
    }

    #[test]
    fn total_is_sum_of_parts_bit_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let d = dialogue(n);
        let s = store(&vectors);
        let topic = ProjectionHead::identity(HeadKind::Topic, 6, 4).unwrap();
        let coh = ProjectionHead::identity(HeadKind::Coherence, 6, 6).unwrap();
        for b in boundary_scores(&d, &s, &topic, &coh).unwrap() {
            assert_eq!(b.total.to_bits(), (b.topic_sim + b.coherence).to_bits());
        }
    }

    #[test]
    fn missing_embedding_is_an_error() {
        let d = dialogue(2);
        let s = store(&[vec![1.0, 0.0]]); // only turn 0
        let topic = ProjectionHead::identity(HeadKind::Topic, 2, 2).unwrap();
        let coh = ProjectionHead::identity(HeadKind::Coherence, 2, 2).unwrap();
        assert!(boundary_scores(&d, &s, &topic, &coh).is_err());
    }

    #[test]
    fn example_arithmetic() {
        // t = 0.30 and c = 0.45 must combine to exactly 0.75; construct unit
        // vectors with those cosines against the first turn
        let t = 0.30f64;
        let c = 0.45f64;
        let v0 = vec![1.0, 0.0, 1.0, 0.0];
        let v1 = vec![t, (1.0 - t * t).sqrt(), c, (1.0 - c * c).sqrt()];
        let d = dialogue(2);
        let s = store(&[v0, v1]);
        // topic head reads dims 0-1, coherence head reads dims 2-3
        let topic = ProjectionHead::from_matrix(
            HeadKind::Topic,
            nalgebra::DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        )
        .unwrap();
        let coh = ProjectionHead::from_matrix(
            HeadKind::Coherence,
            nalgebra::DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let scores = boundary_scores(&d, &s, &topic, &coh).unwrap();
        assert!((scores[0].topic_sim - 0.30).abs() < 1e-12);
        assert!((scores[0].coherence - 0.45).abs() < 1e-12);
        assert!((scores[0].total - 0.75).abs() < 1e-12);
    }
}
