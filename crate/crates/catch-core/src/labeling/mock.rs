//! Deterministic mock chat client for offline runs and tests.
//!
//! Labeling is a keyword-to-label lookup with majority tallying. A payload
//! whose keyword hits span too many distinct labels yields a fixed vague
//! label, mimicking flat generation losing the plot on mingled input; a
//! payload with no keyword hits yields a fixed fallback.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::client::{PromptClient, PromptKind};
use crate::error::{Error, Result};

pub const DEFAULT_VAGUE_LABEL: &str = "handle general inquiries";
pub const DEFAULT_FALLBACK_LABEL: &str = "unknown request";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRules {
    /// keyword -> label
    pub keywords: BTreeMap<String, String>,
    /// Payloads spanning at least this many distinct labels go vague.
    pub distinct_label_limit: usize,
    pub vague_label: String,
    pub fallback_label: String,
}

impl Default for MockRules {
    fn default() -> Self {
        MockRules {
            keywords: BTreeMap::new(),
            distinct_label_limit: 3,
            vague_label: DEFAULT_VAGUE_LABEL.to_string(),
            fallback_label: DEFAULT_FALLBACK_LABEL.to_string(),
        }
    }
}

impl MockRules {
    pub fn from_keywords<K, V>(pairs: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<String>,
    {
        MockRules {
            keywords: pairs
                .into_iter()
                .map(|(k, v)| (k.into().to_lowercase(), v.into()))
                .collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockClient {
    rules: MockRules,
    parallelism: usize,
}

impl MockClient {
    pub fn new(rules: MockRules) -> Self {
        MockClient {
            rules,
            parallelism: 4,
        }
    }

    fn label_payload(&self, payload: &str) -> String {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for line in payload.lines() {
            let line = line.to_lowercase();
            for (keyword, label) in &self.rules.keywords {
                if line.contains(keyword.as_str()) {
                    *counts.entry(label.as_str()).or_default() += 1;
                }
            }
        }
        if counts.is_empty() {
            return self.rules.fallback_label.clone();
        }
        if counts.len() >= self.rules.distinct_label_limit {
            return self.rules.vague_label.clone();
        }
        // highest count, ties to the lexicographically smaller label
        counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(label, _)| label.to_string())
            .expect("non-empty counts")
    }
}

impl PromptClient for MockClient {
    fn generate(&self, kind: PromptKind, payload: &str) -> Result<String> {
        match kind {
            PromptKind::Label => Ok(self.label_payload(payload)),
            // tie arbitration: deterministic lexicographic choice
            PromptKind::VoteCore => payload
                .lines()
                .filter(|l| !l.trim().is_empty())
                .min()
                .map(|l| l.to_string())
                .ok_or_else(|| Error::Client("vote on empty candidate list".into())),
            PromptKind::IsRelevant => {
                let mut lines = payload.lines().filter(|l| !l.trim().is_empty());
                let (candidate, core) = (lines.next(), lines.next());
                match (candidate, core) {
                    (Some(c), Some(k)) => {
                        let fold = |s: &str| super::fold_label(s);
                        Ok(if fold(c) == fold(k) { "yes".into() } else { "no".into() })
                    }
                    _ => Err(Error::Client("relevance prompt needs two labels".into())),
                }
            }
            PromptKind::Conclude => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for line in payload.lines().filter(|l| !l.trim().is_empty()) {
                    *counts.entry(line).or_default() += 1;
                }
                counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(label, _)| label.to_string())
                    .ok_or_else(|| Error::Client("conclude on empty label set".into()))
            }
        }
    }

    fn parallelism(&self) -> usize {
        self.parallelism.max(1)
    }
}
