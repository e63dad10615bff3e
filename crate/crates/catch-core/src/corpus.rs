//! Dialogue corpus and preference-annotation loading.
//!
//! Corpora arrive as JSONL, one dialogue per line. Preference annotations are
//! should-link / cannot-link pairs over target utterances. Both are validated
//! eagerly on load and immutable afterwards.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One turn of a dialogue. `gold_theme` may be present only on target turns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub speaker: String,
    pub text: String,
    pub is_target: bool,
    pub gold_theme: Option<String>,
}

impl Utterance {
    /// Canonical join key, `dialogue_id:turn_index`.
    pub fn key(&self) -> String {
        utterance_key(&self.dialogue_id, self.turn_index)
    }
}

pub fn utterance_key(dialogue_id: &str, turn_index: usize) -> String {
    format!("{dialogue_id}:{turn_index}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<Utterance>,
}

impl Dialogue {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// Reference to one utterance by dialogue id and turn index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UtteranceRef {
    pub dialogue_id: String,
    pub turn_index: usize,
}

impl UtteranceRef {
    pub fn key(&self) -> String {
        utterance_key(&self.dialogue_id, self.turn_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    ShouldLink,
    CannotLink,
}

/// A should-link / cannot-link annotation between two target utterances,
/// stored in canonical order (`a < b` by `(dialogue_id, turn_index)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferencePair {
    pub a: UtteranceRef,
    pub b: UtteranceRef,
    pub relation: Relation,
}

impl PreferencePair {
    /// Regression target per the reward-model convention: should-link is 1.
    pub fn target(&self) -> f64 {
        match self.relation {
            Relation::ShouldLink => 1.0,
            Relation::CannotLink => 0.0,
        }
    }
}

/// Counts by relation: `(should_link, cannot_link)`.
pub fn relation_counts(pairs: &[PreferencePair]) -> (usize, usize) {
    let should = pairs
        .iter()
        .filter(|p| p.relation == Relation::ShouldLink)
        .count();
    (should, pairs.len() - should)
}

/// A validated, indexed set of dialogues.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    dialogues: Vec<Dialogue>,
    index: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(dialogues: Vec<Dialogue>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, d) in dialogues.iter().enumerate() {
            validate_dialogue(d)?;
            if index.insert(d.dialogue_id.clone(), i).is_some() {
                return Err(Error::Invariant(format!(
                    "duplicate dialogue_id `{}`",
                    d.dialogue_id
                )));
            }
        }
        Ok(Corpus { dialogues, index })
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn get(&self, dialogue_id: &str) -> Option<&Dialogue> {
        self.index.get(dialogue_id).map(|&i| &self.dialogues[i])
    }

    pub fn utterance(&self, r: &UtteranceRef) -> Option<&Utterance> {
        self.get(&r.dialogue_id)
            .and_then(|d| d.turns.get(r.turn_index))
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.dialogues.iter().flat_map(|d| d.turns.iter())
    }

    pub fn target_utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances().filter(|u| u.is_target)
    }

    /// Canonical JSONL rendering; `load_corpus` followed by `to_jsonl` is a
    /// fixpoint (key order and turn order normalized).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.dialogues {
            let row = DialogueRow {
                dialogue_id: d.dialogue_id.clone(),
                turns: d
                    .turns
                    .iter()
                    .map(|u| TurnRow {
                        turn_index: u.turn_index,
                        speaker: u.speaker.clone(),
                        text: u.text.clone(),
                        is_target: u.is_target,
                        theme: u.gold_theme.clone(),
                    })
                    .collect(),
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("serialize"));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TurnRow {
    turn_index: usize,
    speaker: String,
    text: String,
    is_target: bool,
    theme: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DialogueRow {
    dialogue_id: String,
    turns: Vec<TurnRow>,
}

fn validate_dialogue(d: &Dialogue) -> Result<()> {
    if d.dialogue_id.is_empty() {
        return Err(Error::Invariant("empty dialogue_id".into()));
    }
    if d.turns.is_empty() {
        return Err(Error::Invariant(format!(
            "dialogue `{}` has no turns",
            d.dialogue_id
        )));
    }
    for (i, u) in d.turns.iter().enumerate() {
        if u.dialogue_id != d.dialogue_id {
            return Err(Error::Invariant(format!(
                "dialogue `{}`: turn {} carries mismatched dialogue_id `{}`",
                d.dialogue_id, i, u.dialogue_id
            )));
        }
        if u.turn_index != i {
            return Err(Error::Invariant(format!(
                "dialogue `{}`: turn indices must be contiguous 0..{}, found {} at position {}",
                d.dialogue_id,
                d.turns.len() - 1,
                u.turn_index,
                i
            )));
        }
        if u.text.is_empty() {
            return Err(Error::Invariant(format!(
                "dialogue `{}` turn {}: empty text",
                d.dialogue_id, u.turn_index
            )));
        }
        if u.gold_theme.is_some() && !u.is_target {
            return Err(Error::Invariant(format!(
                "dialogue `{}` turn {}: theme on non-target utterance",
                d.dialogue_id, u.turn_index
            )));
        }
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Load and validate a corpus from JSONL (one dialogue per line).
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string())
}

pub fn parse_corpus(text: &str, source: &str) -> Result<Corpus> {
    let mut dialogues = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: DialogueRow = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let mut turns: Vec<Utterance> = row
            .turns
            .into_iter()
            .map(|t| Utterance {
                dialogue_id: row.dialogue_id.clone(),
                turn_index: t.turn_index,
                speaker: t.speaker,
                text: t.text.trim().to_string(),
                is_target: t.is_target,
                gold_theme: t.theme.map(|s| s.trim().to_string()),
            })
            .collect();
        // Accept any on-disk order; index uniqueness doubles as the sort key.
        turns.sort_by_key(|u| u.turn_index);
        let seen: std::collections::BTreeSet<usize> = turns.iter().map(|u| u.turn_index).collect();
        if seen.len() != turns.len() {
            return Err(Error::Invariant(format!(
                "dialogue `{}`: duplicate turn_index",
                row.dialogue_id
            )));
        }
        dialogues.push(Dialogue {
            dialogue_id: row.dialogue_id,
            turns,
        });
    }
    Corpus::new(dialogues)
}

#[derive(Serialize, Deserialize)]
struct PreferenceRow {
    a: UtteranceRef,
    b: UtteranceRef,
    relation: Relation,
}

/// Load preference pairs, resolving every reference against `corpus`.
///
/// Pairs are canonicalized so that `(a, b)` and `(b, a)` collapse to one
/// entry; the same pair annotated with both relations is a hard error.
pub fn load_preferences(path: &Path, corpus: &Corpus) -> Result<Vec<PreferencePair>> {
    let text = read_to_string(path)?;
    parse_preferences(&text, &path.display().to_string(), corpus)
}

pub fn parse_preferences(text: &str, source: &str, corpus: &Corpus) -> Result<Vec<PreferencePair>> {
    let mut canonical: BTreeMap<(UtteranceRef, UtteranceRef), Relation> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: PreferenceRow = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if row.a == row.b {
            return Err(Error::Invariant(format!(
                "{source}:{}: preference pair references the same utterance `{}` twice",
                lineno + 1,
                row.a.key()
            )));
        }
        for r in [&row.a, &row.b] {
            let u = corpus.utterance(r).ok_or_else(|| {
                Error::Invariant(format!(
                    "{source}:{}: dangling reference `{}`",
                    lineno + 1,
                    r.key()
                ))
            })?;
            if !u.is_target {
                return Err(Error::Invariant(format!(
                    "{source}:{}: reference `{}` is not a target utterance",
                    lineno + 1,
                    r.key()
                )));
            }
        }
        let (a, b) = if row.a <= row.b {
            (row.a, row.b)
        } else {
            (row.b, row.a)
        };
        if let Some(prev) = canonical.get(&(a.clone(), b.clone())) {
            if *prev != row.relation {
                return Err(Error::Invariant(format!(
                    "{source}:{}: contradictory annotations for pair ({}, {})",
                    lineno + 1,
                    a.key(),
                    b.key()
                )));
            }
        } else {
            canonical.insert((a, b), row.relation);
        }
    }
    Ok(canonical
        .into_iter()
        .map(|((a, b), relation)| PreferencePair { a, b, relation })
        .collect())
}

/// Canonical JSONL rendering of preference pairs.
pub fn preferences_to_jsonl(pairs: &[PreferencePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let row = PreferenceRow {
            a: p.a.clone(),
            b: p.b.clone(),
            relation: p.relation,
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("serialize"));
    }
    out
}
