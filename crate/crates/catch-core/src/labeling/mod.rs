//! Hierarchical theme label generation: split a cluster into groups, label
//! each group, vote a core label, drop candidates irrelevant to the core,
//! and conclude one consolidated theme. A flat single-call mode is kept for
//! ablation.

mod client;
mod mock;
pub mod prompts;

pub use client::{
    parse_bool_response, parse_chat_response, ClientConfig, HttpClient, PromptClient, PromptKind,
    TOKEN_ENV_VAR,
};
pub use mock::{MockClient, MockRules, DEFAULT_FALLBACK_LABEL, DEFAULT_VAGUE_LABEL};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::parallel_map;

/// Trim and collapse internal whitespace.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case-folded, punctuation-stripped form used for label comparisons.
pub fn fold_label(s: &str) -> String {
    normalize_label(
        &s.to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
            .collect::<String>(),
    )
}

/// A group-level label candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCandidate {
    pub cluster: usize,
    pub group: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeProvenance {
    pub core: String,
    pub group_labels: Vec<String>,
    pub cleaned: Vec<String>,
}

/// Final theme for one cluster, with everything that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeLabel {
    pub cluster: usize,
    pub text: String,
    pub provenance: ThemeProvenance,
}

/// A cluster's members as labeling inputs, in stable member order.
#[derive(Debug, Clone)]
pub struct ClusterMembers {
    pub cluster: usize,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub group_size: usize,
    /// Single Label call over all members, no hierarchy.
    pub flat: bool,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            group_size: 25,
            flat: false,
            seed: 0,
            jobs: 1,
        }
    }
}

/// Random permutation under the seed, chunked into groups of `group_size`
/// (the last may be short). The groups partition the input.
pub fn split_groups<T: Clone>(members: &[T], group_size: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if members.is_empty() {
        return Err(Error::InvalidParameter("cannot split an empty cluster".into()));
    }
    if group_size == 0 {
        return Err(Error::InvalidParameter("group_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order
        .chunks(group_size)
        .map(|chunk| chunk.iter().map(|&i| members[i].clone()).collect())
        .collect())
}

fn generate_non_empty(
    client: &dyn PromptClient,
    kind: PromptKind,
    payload: &str,
) -> Result<String> {
    let mut last_err: Option<Error> = None;
    for _ in 0..client.max_retries().max(1) {
        match client.generate(kind, payload) {
            Ok(text) => {
                let normalized = normalize_label(&text);
                if !normalized.is_empty() {
                    return Ok(normalized);
                }
                last_err = Some(Error::Client("client returned an empty label".into()));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Client("no generation attempts made".into())))
}

/// Label one group of member texts.
pub fn label_group(
    cluster: usize,
    group: usize,
    texts: &[String],
    client: &dyn PromptClient,
) -> Result<LabelCandidate> {
    if texts.is_empty() {
        return Err(Error::InvalidParameter("cannot label an empty group".into()));
    }
    let payload = texts.join("\n");
    let text = generate_non_empty(client, PromptKind::Label, &payload)?;
    Ok(LabelCandidate {
        cluster,
        group,
        text,
    })
}

/// Majority vote over folded candidate labels. Ties go to the client when
/// one is supplied and to the lexicographically smallest folded label
/// otherwise. Returns the winning class's first-seen raw text.
pub fn vote_core(
    candidates: &[LabelCandidate],
    client: Option<&dyn PromptClient>,
) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("vote over zero candidates".into()));
    }
    let mut counts: Vec<(String, String, usize)> = Vec::new(); // (fold, representative, count)
    for c in candidates {
        let fold = fold_label(&c.text);
        match counts.iter_mut().find(|(f, _, _)| *f == fold) {
            Some(entry) => entry.2 += 1,
            None => counts.push((fold, c.text.clone(), 1)),
        }
    }
    let best = counts.iter().map(|(_, _, n)| *n).max().expect("non-empty");
    let mut tied: Vec<&(String, String, usize)> =
        counts.iter().filter(|(_, _, n)| *n == best).collect();
    tied.sort_by(|a, b| a.0.cmp(&b.0));
    if tied.len() == 1 {
        return Ok(tied[0].1.clone());
    }
    match client {
        None => Ok(tied[0].1.clone()),
        Some(client) => {
            let payload = tied
                .iter()
                .map(|(_, rep, _)| rep.as_str())
                .collect::<Vec<_>>()
                .join("\n");
            let mut last_err: Option<Error> = None;
            for _ in 0..client.max_retries().max(1) {
                match client.generate(PromptKind::VoteCore, &payload) {
                    Ok(answer) => {
                        let fold = fold_label(&answer);
                        if let Some(winner) = tied.iter().find(|(f, _, _)| *f == fold) {
                            return Ok(winner.1.clone());
                        }
                        last_err = Some(Error::Client(format!(
                            "vote answer `{answer}` is not a tied candidate"
                        )));
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            Err(last_err.expect("at least one attempt"))
        }
    }
}

/// Keep candidates the client deems relevant to the core; the core itself
/// is always retained. Order is preserved.
pub fn filter_relevant(
    candidates: &[LabelCandidate],
    core: &str,
    client: &dyn PromptClient,
) -> Result<Vec<LabelCandidate>> {
    let core_fold = fold_label(core);
    let mut kept = Vec::new();
    for c in candidates {
        if fold_label(&c.text) == core_fold {
            kept.push(c.clone());
            continue;
        }
        let payload = format!("{}\n{}", c.text, core);
        let mut verdict: Option<bool> = None;
        let mut last_err: Option<Error> = None;
        for _ in 0..client.max_retries().max(1) {
            match client.generate(PromptKind::IsRelevant, &payload) {
                Ok(answer) => match parse_bool_response(&answer) {
                    Some(b) => {
                        verdict = Some(b);
                        break;
                    }
                    None => {
                        last_err = Some(Error::Client(format!(
                            "relevance answer `{answer}` is not yes/no"
                        )))
                    }
                },
                Err(e) => last_err = Some(e),
            }
        }
        match verdict {
            Some(true) => kept.push(c.clone()),
            Some(false) => {}
            None => return Err(last_err.expect("at least one attempt")),
        }
    }
    Ok(kept)
}

/// Consolidate the cleaned label set into the final theme.
pub fn conclude(
    cluster: usize,
    cleaned: &[LabelCandidate],
    core: &str,
    group_labels: &[String],
    client: &dyn PromptClient,
) -> Result<ThemeLabel> {
    if cleaned.is_empty() {
        return Err(Error::InvalidParameter("conclude over an empty cleaned set".into()));
    }
    let payload = cleaned
        .iter()
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let text = generate_non_empty(client, PromptKind::Conclude, &payload)?;
    Ok(ThemeLabel {
        cluster,
        text,
        provenance: ThemeProvenance {
            core: core.to_string(),
            group_labels: group_labels.to_vec(),
            cleaned: cleaned.iter().map(|c| c.text.clone()).collect(),
        },
    })
}

/// Full hierarchical generation for one cluster; flat mode short-circuits
/// to a single Label call over all members.
pub fn generate_theme(
    members: &ClusterMembers,
    client: &dyn PromptClient,
    cfg: &LabelingConfig,
) -> Result<ThemeLabel> {
    if members.texts.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "cluster {} has no members to label",
            members.cluster
        )));
    }
    if cfg.flat {
        let candidate = label_group(members.cluster, 0, &members.texts, client)?;
        return Ok(ThemeLabel {
            cluster: members.cluster,
            text: candidate.text.clone(),
            provenance: ThemeProvenance {
                core: candidate.text.clone(),
                group_labels: vec![candidate.text.clone()],
                cleaned: vec![candidate.text],
            },
        });
    }

    let groups = split_groups(&members.texts, cfg.group_size, cfg.seed)?;
    let jobs = cfg.jobs.max(1).min(client.parallelism());
    let candidates: Vec<LabelCandidate> =
        parallel_map(&groups, jobs, |i, group| label_group(members.cluster, i, group, client))
            .into_iter()
            .collect::<Result<_>>()?;

    let core = vote_core(&candidates, Some(client))?;
    let cleaned = filter_relevant(&candidates, &core, client)?;
    let group_labels: Vec<String> = candidates.iter().map(|c| c.text.clone()).collect();
    conclude(members.cluster, &cleaned, &core, &group_labels, client)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock() -> MockClient {
        MockClient::new(MockRules::from_keywords([
            ("flight", "book a flight"),
            ("card", "report lost card"),
            ("address", "update home address"),
        ]))
    }

    fn texts(spec: &[(&str, usize)]) -> Vec<String> {
        let mut out = Vec::new();
        for (kw, n) in spec {
            for i in 0..*n {
                out.push(format!("customer message {i} about my {kw} please"));
            }
        }
        out
    }

    #[test]
    fn group_size_covering_cluster_gives_one_group() {
        let members: Vec<usize> = (0..25).collect();
        let groups = split_groups(&members, 25, 7).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 25);
    }

    #[test]
    fn chunk_sizes_follow_group_size() {
        let members: Vec<usize> = (0..25).collect();
        let groups = split_groups(&members, 10, 7).unwrap();
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        assert_eq!(sizes, vec![10, 10, 5]);
    }

    #[test]
    fn singleton_cluster_gives_singleton_group() {
        let groups = split_groups(&[42], 10, 0).unwrap();
        assert_eq!(groups, vec![vec![42]]);
    }

    #[test]
    fn empty_cluster_rejected() {
        assert!(split_groups::<usize>(&[], 10, 0).is_err());
    }

    proptest::proptest! {
        /// Groups always partition the cluster exactly.
        #[test]
        fn groups_partition_cluster(n in 1usize..60, size in 1usize..30, seed in 0u64..50) {
            let members: Vec<usize> = (0..n).collect();
            let groups = split_groups(&members, size, seed).unwrap();
            let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, members);
            for (i, g) in groups.iter().enumerate() {
                if i + 1 < groups.len() {
                    proptest::prop_assert_eq!(g.len(), size);
                }
            }
        }
    }

    #[test]
    fn label_group_hits_keyword_table() {
        let t = texts(&[("flight", 3)]);
        let c = label_group(0, 0, &t, &mock()).unwrap();
        assert_eq!(c.text, "book a flight");
    }

    #[test]
    fn single_member_group_is_labeled() {
        let t = texts(&[("card", 1)]);
        let c = label_group(2, 1, &t, &mock()).unwrap();
        assert_eq!(c.text, "report lost card");
        assert_eq!((c.cluster, c.group), (2, 1));
    }

    /// Client that always produces an empty completion.
    struct EmptyClient;
    impl PromptClient for EmptyClient {
        fn generate(&self, _: PromptKind, _: &str) -> crate::error::Result<String> {
            Ok("   ".into())
        }
    }

    #[test]
    fn empty_responses_exhaust_retries() {
        let t = texts(&[("flight", 1)]);
        let err = label_group(0, 0, &t, &EmptyClient).unwrap_err();
        assert!(matches!(err, Error::Client(_)), "{err}");
    }

    fn cands(labels: &[&str]) -> Vec<LabelCandidate> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabelCandidate {
                cluster: 0,
                group: i,
                text: l.to_string(),
            })
            .collect()
    }

    #[test]
    fn strict_majority_wins_vote() {
        let c = cands(&["update address", "update address", "close account"]);
        assert_eq!(vote_core(&c, None).unwrap(), "update address");
    }

    #[test]
    fn single_candidate_wins_vote() {
        let c = cands(&["book a flight"]);
        assert_eq!(vote_core(&c, None).unwrap(), "book a flight");
    }

    #[test]
    fn clientless_tie_takes_lexicographic_minimum() {
        let c = cands(&["update address", "close account"]);
        assert_eq!(vote_core(&c, None).unwrap(), "close account");
    }

    #[test]
    fn client_arbitrates_ties() {
        let c = cands(&["update address", "close account"]);
        // mock vote picks the lexicographically smallest tied label
        assert_eq!(vote_core(&c, Some(&mock())).unwrap(), "close account");
    }

    #[test]
    fn vote_folds_case_and_punctuation() {
        let c = cands(&["Book a Flight!", "book a flight", "close account"]);
        assert_eq!(vote_core(&c, None).unwrap(), "Book a Flight!");
    }

    #[test]
    fn core_is_always_retained() {
        let c = cands(&["book a flight", "close account"]);
        let kept = filter_relevant(&c, "book a flight", &mock()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].text, "book a flight");
    }

    #[test]
    fn duplicates_kept_unrelated_dropped() {
        let c = cands(&["book a flight", "book a flight", "close account"]);
        let kept = filter_relevant(&c, "book a flight", &mock()).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|k| k.text == "book a flight"));
    }

    #[test]
    fn identical_candidates_all_retained() {
        let c = cands(&["update home address", "update home address"]);
        let kept = filter_relevant(&c, "update home address", &mock()).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn conclude_singleton_is_unchanged() {
        let c = cands(&["book a flight"]);
        let theme = conclude(3, &c, "book a flight", &["book a flight".into()], &mock()).unwrap();
        assert_eq!(theme.text, "book a flight");
        assert_eq!(theme.cluster, 3);
    }

    #[test]
    fn conclude_mixed_set_takes_majority() {
        let c = cands(&["book a flight", "book a flight", "reserve a seat"]);
        let theme = conclude(0, &c, "book a flight", &[], &mock()).unwrap();
        assert_eq!(theme.text, "book a flight");
    }

    #[test]
    fn pure_cluster_yields_planted_label() {
        let members = ClusterMembers {
            cluster: 0,
            texts: texts(&[("flight", 12)]),
        };
        let theme = generate_theme(&members, &mock(), &LabelingConfig::default()).unwrap();
        assert_eq!(theme.text, "book a flight");
    }

    #[test]
    fn mixed_cluster_denoises_to_majority() {
        // 60/40 mixture; a two-label payload never goes vague, so the
        // majority keyword wins at any group size
        let members = ClusterMembers {
            cluster: 0,
            texts: texts(&[("flight", 12), ("card", 8)]),
        };
        for group_size in [20, 7, 5] {
            for seed in 0..10 {
                let cfg = LabelingConfig {
                    group_size,
                    seed,
                    ..Default::default()
                };
                let theme = generate_theme(&members, &mock(), &cfg).unwrap();
                assert_eq!(theme.text, "book a flight", "size {group_size} seed {seed}");
            }
        }
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let members = ClusterMembers {
            cluster: 0,
            texts: Vec::new(),
        };
        assert!(generate_theme(&members, &mock(), &LabelingConfig::default()).is_err());
    }

    #[test]
    fn flat_mode_is_one_call() {
        let members = ClusterMembers {
            cluster: 1,
            texts: texts(&[("address", 6)]),
        };
        let cfg = LabelingConfig {
            flat: true,
            ..Default::default()
        };
        let theme = generate_theme(&members, &mock(), &cfg).unwrap();
        assert_eq!(theme.text, "update home address");
        assert_eq!(theme.provenance.group_labels.len(), 1);
    }

    #[test]
    fn identical_seed_gives_identical_theme() {
        let members = ClusterMembers {
            cluster: 0,
            texts: texts(&[("flight", 9), ("card", 6)]),
        };
        let cfg = LabelingConfig {
            group_size: 4,
            seed: 11,
            jobs: 4,
            ..Default::default()
        };
        let a = generate_theme(&members, &mock(), &cfg).unwrap();
        let b = generate_theme(&members, &mock(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn provenance_contains_exactly_the_produced_candidates() {
        let members = ClusterMembers {
            cluster: 0,
            texts: texts(&[("flight", 10), ("card", 5)]),
        };
        let cfg = LabelingConfig {
            group_size: 5,
            seed: 3,
            ..Default::default()
        };
        let theme = generate_theme(&members, &mock(), &cfg).unwrap();
        let n_groups = members.texts.len().div_ceil(cfg.group_size);
        assert_eq!(theme.provenance.group_labels.len(), n_groups);
        // every cleaned label is one of the produced group labels
        for c in &theme.provenance.cleaned {
            assert!(theme.provenance.group_labels.contains(c));
        }
    }
}
