//! ROUGE-1/2/L between generated and reference theme labels (F1 variant).

/// F1 scores for unigram overlap, bigram overlap, and longest common
/// subsequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

/// Case-folded, punctuation-stripped whitespace tokens. Any character that
/// is not alphanumeric acts as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

fn f1(matches: f64, candidate_len: f64, reference_len: f64) -> f64 {
    if candidate_len == 0.0 || reference_len == 0.0 || matches == 0.0 {
        return 0.0;
    }
    let p = matches / candidate_len;
    let r = matches / reference_len;
    2.0 * p * r / (p + r)
}

fn ngram_f1(cand: &[String], reference: &[String], n: usize) -> f64 {
    if cand.len() < n || reference.len() < n {
        return 0.0;
    }
    let grams = |toks: &[String]| -> std::collections::HashMap<Vec<String>, usize> {
        let mut m = std::collections::HashMap::new();
        for w in toks.windows(n) {
            *m.entry(w.to_vec()).or_insert(0) += 1;
        }
        m
    };
    let cg = grams(cand);
    let rg = grams(reference);
    let matches: usize = cg
        .iter()
        .map(|(g, &c)| c.min(rg.get(g).copied().unwrap_or(0)))
        .sum();
    f1(
        matches as f64,
        (cand.len() - n + 1) as f64,
        (reference.len() - n + 1) as f64,
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-1, ROUGE-2, and ROUGE-L F1. Empty against anything scores 0.
pub fn rouge_scores(candidate: &str, reference: &str) -> RougeScores {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return RougeScores {
            rouge1: 0.0,
            rouge2: 0.0,
            rouge_l: 0.0,
        };
    }
    RougeScores {
        rouge1: ngram_f1(&c, &r, 1),
        rouge2: ngram_f1(&c, &r, 2),
        rouge_l: f1(lcs_len(&c, &r) as f64, c.len() as f64, r.len() as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_score_one() {
        let s = rouge_scores("book a flight", "book a flight");
        assert_eq!((s.rouge1, s.rouge2, s.rouge_l), (1.0, 1.0, 1.0));
    }

    #[test]
    fn token_disjoint_strings_score_zero() {
        let s = rouge_scores("update address", "cancel booking");
        assert_eq!((s.rouge1, s.rouge2, s.rouge_l), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_vs_anything_scores_zero() {
        let s = rouge_scores("", "book a flight");
        assert_eq!((s.rouge1, s.rouge2, s.rouge_l), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_computed_overlap() {
        // c = [book, a, flight], r = [book, flight]
        // R1: match 2, P=2/3, R=1 -> 0.8; R2: no shared bigram; RL: lcs 2 -> 0.8
        let s = rouge_scores("book a flight", "book flight");
        assert!((s.rouge1 - 0.8).abs() < 1e-12);
        assert_eq!(s.rouge2, 0.0);
        assert!((s.rouge_l - 0.8).abs() < 1e-12);
    }

    #[test]
    fn punctuation_and_case_are_normalized() {
        let s = rouge_scores("Book a Flight!", "book a flight");
        assert_eq!((s.rouge1, s.rouge2, s.rouge_l), (1.0, 1.0, 1.0));
    }

    #[test]
    fn bigram_partial_overlap() {
        // c = [report, lost, card], r = [report, lost, card, now]
        // R1: 3 matches, P=1, R=3/4 -> 6/7
        // R2: bigrams 2 of 2 vs 3 -> P=1, R=2/3 -> 4/5
        // RL: lcs 3 -> 6/7
        let s = rouge_scores("report lost card", "report lost card now");
        assert!((s.rouge1 - 6.0 / 7.0).abs() < 1e-12);
        assert!((s.rouge2 - 0.8).abs() < 1e-12);
        assert!((s.rouge_l - 6.0 / 7.0).abs() < 1e-12);
    }

    proptest::proptest! {
        /// With repetition-free verb-phrase-like labels, unigram F1 bounds
        /// bigram F1, and all scores stay in [0, 1].
        #[test]
        fn rouge1_bounds_rouge2(a_idx in proptest::collection::vec(0usize..20, 1..6),
                                b_idx in proptest::collection::vec(0usize..20, 1..6)) {
            const WORDS: [&str; 20] = [
                "book", "cancel", "update", "report", "close", "open", "check",
                "flight", "card", "address", "account", "balance", "claim",
                "policy", "ticket", "refund", "loan", "rate", "travel", "home",
            ];
            let distinct = |idx: &[usize]| -> String {
                let mut seen = std::collections::BTreeSet::new();
                idx.iter().filter(|i| seen.insert(**i)).map(|&i| WORDS[i]).collect::<Vec<_>>().join(" ")
            };
            let (a, b) = (distinct(&a_idx), distinct(&b_idx));
            let s = rouge_scores(&a, &b);
            proptest::prop_assert!(s.rouge1 >= s.rouge2 - 1e-12);
            for v in [s.rouge1, s.rouge2, s.rouge_l] {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
