//! Shared synthetic fixtures: a planted-theme dialogue corpus with
//! embeddings, preferences, label embeddings, and mock labeling rules, plus
//! a merged-blob clustering instance for conflict-repair tests.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use catch_core::clustering::{ClusterConfig, PrmConfig, TopicItem};
use catch_core::config::{ClientKind, PipelineConfig};
use catch_core::corpus::{PreferencePair, Relation, UtteranceRef};
use catch_core::embedding::EmbeddingStore;
use catch_core::labeling::MockRules;

pub const THEMES: [(&str, &str); 3] = [
    ("book a flight", "flight"),
    ("report lost card", "card"),
    ("update home address", "address"),
];

const FILLER: [&str; 4] = [
    "okay let me take a look",
    "one moment please",
    "thanks for holding",
    "is there anything else today",
];

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn theme_vector(theme: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[theme] = 1.0;
    for x in v.iter_mut().skip(3) {
        *x = rng.gen_range(-0.1..0.1);
    }
    unit(&v)
}

pub struct PlantedFixture {
    pub dir: tempfile::TempDir,
    pub config: PipelineConfig,
    /// target keys per theme, in corpus order
    pub targets_by_theme: Vec<Vec<UtteranceRef>>,
}

/// Write a synthetic corpus of `n_dialogues`, each holding two planted theme
/// segments of four turns with one annotated target each, plus matching
/// embeddings, consistent preference pairs, label embeddings, and a config
/// wired for the mock client with K = 3.
pub fn planted_fixture(n_dialogues: usize, seed: u64) -> PlantedFixture {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 8;

    let mut corpus = String::new();
    let mut embeddings = String::new();
    let mut targets_by_theme: Vec<Vec<UtteranceRef>> = vec![Vec::new(); THEMES.len()];

    for d in 0..n_dialogues {
        let dialogue_id = format!("dlg{d:03}");
        let halves = [d % 3, (d + 1) % 3];
        let mut turns = Vec::new();
        for (half, &theme) in halves.iter().enumerate() {
            let base = half * 4;
            for offset in 0..4 {
                let index = base + offset;
                let is_target = offset == 1;
                let text = if is_target {
                    format!("i need help with my {} today", THEMES[theme].1)
                } else {
                    FILLER[(index + d) % FILLER.len()].to_string()
                };
                let theme_field = if is_target {
                    format!("\"{}\"", THEMES[theme].0)
                } else {
                    "null".to_string()
                };
                turns.push(format!(
                    r#"{{"turn_index":{index},"speaker":"{}","text":"{text}","is_target":{is_target},"theme":{theme_field}}}"#,
                    if index % 2 == 0 { "user" } else { "agent" },
                ));
                let vector = theme_vector(theme, dim, &mut rng);
                let cells: Vec<String> = vector.iter().map(|x| format!("{x}")).collect();
                let _ = writeln!(
                    embeddings,
                    r#"{{"key":"{dialogue_id}:{index}","vector":[{}]}}"#,
                    cells.join(",")
                );
                if is_target {
                    targets_by_theme[theme].push(UtteranceRef {
                        dialogue_id: dialogue_id.clone(),
                        turn_index: index,
                    });
                }
            }
        }
        let _ = writeln!(
            corpus,
            r#"{{"dialogue_id":"{dialogue_id}","turns":[{}]}}"#,
            turns.join(",")
        );
    }

    // consistent preferences: should-link within a theme, cannot-link across
    let mut preferences = String::new();
    let pref_row = |a: &UtteranceRef, b: &UtteranceRef, rel: &str| {
        format!(
            r#"{{"a":{{"dialogue_id":"{}","turn_index":{}}},"b":{{"dialogue_id":"{}","turn_index":{}}},"relation":"{rel}"}}"#,
            a.dialogue_id, a.turn_index, b.dialogue_id, b.turn_index
        )
    };
    for t in 0..THEMES.len() {
        let targets = &targets_by_theme[t];
        for i in (0..targets.len().saturating_sub(1)).step_by(2).take(4) {
            let _ = writeln!(
                preferences,
                "{}",
                pref_row(&targets[i], &targets[i + 1], "should_link")
            );
        }
        let other = &targets_by_theme[(t + 1) % THEMES.len()];
        for i in 0..4.min(targets.len()).min(other.len()) {
            let _ = writeln!(
                preferences,
                "{}",
                pref_row(&targets[i], &other[i], "cannot_link")
            );
        }
    }

    // orthogonal label embeddings for planted labels and the mock fallbacks
    let mut label_embeddings = String::new();
    let label_keys: Vec<&str> = THEMES
        .iter()
        .map(|(l, _)| *l)
        .chain([
            catch_core::labeling::DEFAULT_VAGUE_LABEL,
            catch_core::labeling::DEFAULT_FALLBACK_LABEL,
        ])
        .collect();
    for (i, key) in label_keys.iter().enumerate() {
        let mut v = vec![0.0; label_keys.len()];
        v[i] = 1.0;
        let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(
            label_embeddings,
            r#"{{"key":"{key}","vector":[{}]}}"#,
            cells.join(",")
        );
    }

    let write = |name: &str, content: &str| {
        std::fs::write(dir.path().join(name), content).expect("write fixture file");
    };
    write("corpus.jsonl", &corpus);
    write("embeddings.jsonl", &embeddings);
    write("preferences.jsonl", &preferences);
    write("label_embeddings.jsonl", &label_embeddings);

    let mut config = PipelineConfig::default();
    config.paths.corpus = Some(dir.path().join("corpus.jsonl"));
    config.paths.embeddings = Some(dir.path().join("embeddings.jsonl"));
    config.paths.preferences = Some(dir.path().join("preferences.jsonl"));
    config.paths.label_embeddings = Some(dir.path().join("label_embeddings.jsonl"));
    config.paths.output_dir = Some(dir.path().join("out"));
    config.clustering.k = 3;
    config.labeling.client = ClientKind::Mock;
    config.labeling.mock = MockRules::from_keywords(THEMES.iter().map(|(l, k)| (*k, *l)));
    config.seed = seed;

    PlantedFixture {
        dir,
        config,
        targets_by_theme,
    }
}

pub fn out_path(cfg: &PipelineConfig, name: &str) -> std::path::PathBuf {
    cfg.paths.output_dir.as_ref().expect("output dir").join(name)
}

pub fn read_out(cfg: &PipelineConfig, name: &str) -> String {
    let path = out_path(cfg, name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Two planted groups (38 and 22 points) superimposed into one semantic
/// ball: distinguishable only through a small offset in dimension 0, while
/// larger nuisance noise in the other dimensions steers the purely semantic
/// split the wrong way. Cannot-link pairs bridge the two groups.
pub struct MergedBlobInstance {
    pub items: Vec<TopicItem>,
    pub gold: Vec<usize>,
    pub pairs: Vec<PreferencePair>,
    pub store: EmbeddingStore,
    pub config: ClusterConfig,
}

pub fn merged_blob_instance(seed: u64) -> MergedBlobInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = [38usize, 22usize];
    let mut items = Vec::new();
    let mut gold = Vec::new();
    for (group, &size) in sizes.iter().enumerate() {
        let offset = if group == 0 { 0.3 } else { -0.3 };
        for _ in 0..size {
            let v = vec![
                offset + rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
            ];
            items.push(TopicItem::new(items.len(), format!("pt{}", items.len()), v));
            gold.push(group);
        }
    }

    // ten cannot-link bridges plus ten in-group should-links so the reward
    // model sees both tendencies
    let mut pairs = Vec::new();
    let as_ref = |items: &[TopicItem], i: usize| UtteranceRef {
        dialogue_id: items[i].key.clone(),
        turn_index: 0,
    };
    for i in 0..10 {
        let a = i % sizes[0];
        let b = sizes[0] + (i % sizes[1]);
        pairs.push(PreferencePair {
            a: as_ref(&items, a),
            b: as_ref(&items, b),
            relation: Relation::CannotLink,
        });
    }
    for i in 0..10 {
        let (a, b, base) = if i % 2 == 0 {
            (2 * i % sizes[0], (2 * i + 1) % sizes[0], 0)
        } else {
            (2 * i % sizes[1], (2 * i + 1) % sizes[1], sizes[0])
        };
        if a == b {
            continue;
        }
        pairs.push(PreferencePair {
            a: as_ref(&items, base + a),
            b: as_ref(&items, base + b),
            relation: Relation::ShouldLink,
        });
    }

    let store = EmbeddingStore::from_entries(
        items.iter().map(|t| (format!("{}:0", t.key), t.vector.clone())),
        None,
    )
    .expect("store");

    let config = ClusterConfig {
        k: 2,
        seed,
        prm: PrmConfig {
            learning_rate: 0.5,
            epochs: 400,
        },
        ..Default::default()
    };

    MergedBlobInstance {
        items,
        gold,
        pairs,
        store,
        config,
    }
}
