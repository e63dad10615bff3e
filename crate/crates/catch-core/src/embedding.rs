//! Embedding ingestion. Encoders are external; the pipeline consumes their
//! outputs as JSONL of `{key, vector}` records with one fixed dimension.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Immutable map from key to fixed-dimension finite vector.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    map: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRow {
    key: String,
    vector: Vec<f64>,
}

impl EmbeddingStore {
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
        expected_dim: Option<usize>,
    ) -> Result<Self> {
        let mut store = EmbeddingStore {
            dim: expected_dim,
            map: BTreeMap::new(),
        };
        for (key, vector) in entries {
            store.insert(key, vector)?;
        }
        Ok(store)
    }

    fn insert(&mut self, key: String, vector: Vec<f64>) -> Result<()> {
        if let Some(dim) = self.dim {
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: vector.len(),
                    context: format!("embedding `{key}`"),
                });
            }
        } else {
            self.dim = Some(vector.len());
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant(format!(
                "embedding `{key}` contains a non-finite value"
            )));
        }
        if self.map.insert(key.clone(), vector).is_some() {
            return Err(Error::Invariant(format!("duplicate embedding key `{key}`")));
        }
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.map.get(key).map(|v| v.as_slice())
    }

    pub fn require(&self, key: &str) -> Result<&[f64]> {
        self.get(key)
            .ok_or_else(|| Error::MissingEmbedding(key.to_string()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|k| k.as_str())
    }

    /// New store containing this one plus `extra`; duplicate keys and
    /// dimension mismatches are rejected.
    pub fn augmented(&self, extra: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut out = self.clone();
        for (key, vector) in extra {
            out.insert(key, vector)?;
        }
        Ok(out)
    }

    /// Canonical JSONL rendering (keys sorted).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (key, vector) in &self.map {
            let row = EmbeddingRow {
                key: key.clone(),
                vector: vector.clone(),
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("serialize"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Load an embedding store, enforcing one consistent dimension.
pub fn load_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingStore> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_embeddings(&text, &path.display().to_string(), expected_dim)
}

pub fn parse_embeddings(
    text: &str,
    source: &str,
    expected_dim: Option<usize>,
) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore {
        dim: expected_dim,
        map: BTreeMap::new(),
    };
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingRow = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        store.insert(row.key, row.vector)?;
    }
    Ok(store)
}

/// Which utterances lack embeddings. Segmentation refuses to run when any
/// target utterance is uncovered.
#[derive(Debug, Clone, Default)]
pub struct CoverageReport {
    pub missing: Vec<String>,
    pub missing_targets: Vec<String>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

pub fn coverage_check(corpus: &Corpus, store: &EmbeddingStore) -> CoverageReport {
    let mut report = CoverageReport::default();
    for u in corpus.utterances() {
        let key = u.key();
        if store.get(&key).is_none() {
            if u.is_target {
                report.missing_targets.push(key.clone());
            }
            report.missing.push(key);
        }
    }
    report
}
