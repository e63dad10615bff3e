//! Stage orchestration and artifact files. Each command reads its inputs
//! from disk and writes its artifacts back, so stages can be rerun in
//! isolation and chained by `run_all`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{preference_enhanced_cluster, Stage, TopicItem};
use crate::config::{ClientKind, PipelineConfig};
use crate::corpus::{load_corpus, load_preferences, Corpus, PreferencePair};
use crate::embedding::{coverage_check, load_embeddings, EmbeddingStore};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_run, GoldRun, MetricReport, PredRun};
use crate::labeling::{
    generate_theme, ClusterMembers, HttpClient, MockClient, PromptClient, ThemeLabel,
};
use crate::manifest::{RunManifest, StageRecord};
use crate::parallel::parallel_map;
use crate::segmentation::{
    adapt, boundary_scores, segment_dialogue, text_tiling, Segment, SegmentRow,
};

pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const SEGMENT_EMBEDDINGS_FILE: &str = "segment_embeddings.jsonl";
pub const ASSIGNMENTS_FILE: &str = "assignments.jsonl";
pub const THEMES_FILE: &str = "themes.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SP_MATRIX_FILE: &str = "sp_matrix.csv";

/// JSONL row of the assignment artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub key: String,
    pub cluster: usize,
    pub stage: Stage,
}

/// JSONL row of the themes artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThemeRow {
    pub cluster: usize,
    pub theme: String,
    pub core: String,
    pub candidates: Vec<String>,
    pub cleaned: Vec<String>,
}

fn artifact(cfg: &PipelineConfig, name: &str) -> Result<PathBuf> {
    Ok(cfg.output_dir()?.join(name))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("serialize"));
    }
    out
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str, source: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn record_stage(cfg: &PipelineConfig, name: &str, started: Instant, artifacts: &[&Path]) -> Result<()> {
    let path = artifact(cfg, MANIFEST_FILE)?;
    let mut manifest = RunManifest::load_or_new(&path, cfg);
    manifest.upsert_stage(StageRecord {
        name: name.to_string(),
        millis: started.elapsed().as_millis(),
        artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
    });
    manifest.save(&path)
}

/// Split an utterance key into dialogue id and turn index. The turn index is
/// the numeric suffix after the last colon.
pub fn parse_utterance_key(key: &str) -> Result<(String, usize)> {
    let (dialogue, turn) = key
        .rsplit_once(':')
        .ok_or_else(|| Error::Invariant(format!("malformed utterance key `{key}`")))?;
    let turn = turn
        .parse::<usize>()
        .map_err(|_| Error::Invariant(format!("malformed utterance key `{key}`")))?;
    Ok((dialogue.to_string(), turn))
}

/// Run topic segmentation: adapt heads, score boundaries, tile, and write
/// segments plus the augmented embedding store.
pub fn cmd_segment(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let corpus = load_corpus(cfg.require_path("corpus")?)?;
    let store = load_embeddings(cfg.require_path("embeddings")?, None)?;

    let coverage = coverage_check(&corpus, &store);
    if !coverage.missing_targets.is_empty() {
        return Err(Error::Coverage(coverage.missing_targets));
    }

    let (topic_head, coherence_head, log) = adapt(&corpus, &store, &cfg.adapt_config())?;
    if !log.is_non_increasing() {
        log::info!("adaptation loss was not monotone non-increasing: {:?}", log);
    }

    let mut rows = Vec::new();
    let mut segment_entries = Vec::new();
    for dialogue in corpus.dialogues() {
        let scores = boundary_scores(dialogue, &store, &topic_head, &coherence_head)?;
        let totals: Vec<f64> = scores.iter().map(|s| s.total).collect();
        let boundaries = text_tiling(&totals, &cfg.segmentation.tiling);
        let segments = segment_dialogue(dialogue, &boundaries, &store, &topic_head)?;
        for s in &segments {
            rows.push(SegmentRow {
                dialogue_id: s.dialogue_id.clone(),
                start: s.start,
                end: s.end,
                key: s.key(),
            });
            segment_entries.push((s.key(), s.representation.clone()));
        }
    }

    let segments_path = artifact(cfg, SEGMENTS_FILE)?;
    write_file(&segments_path, &jsonl(rows))?;
    let augmented = store.augmented(segment_entries)?;
    let store_path = artifact(cfg, SEGMENT_EMBEDDINGS_FILE)?;
    augmented.save(&store_path)?;
    record_stage(cfg, "segment", started, &[&segments_path, &store_path])
}

fn load_segments(cfg: &PipelineConfig) -> Result<Vec<SegmentRow>> {
    let path = artifact(cfg, SEGMENTS_FILE)?;
    parse_jsonl(&read_file(&path)?, &path.display().to_string())
}

/// Clusterable items: one per target utterance, carrying the containing
/// segment's representation when segmentation is on, the raw utterance
/// embedding otherwise.
fn build_items(cfg: &PipelineConfig, corpus: &Corpus) -> Result<Vec<TopicItem>> {
    let mut items = Vec::new();
    if cfg.segmentation.enabled {
        let segments = load_segments(cfg)?;
        let seg_store = load_embeddings(&artifact(cfg, SEGMENT_EMBEDDINGS_FILE)?, None)?;
        let by_dialogue: BTreeMap<&str, Vec<&SegmentRow>> =
            segments.iter().fold(BTreeMap::new(), |mut m, s| {
                m.entry(s.dialogue_id.as_str()).or_default().push(s);
                m
            });
        for u in corpus.target_utterances() {
            let segs = by_dialogue.get(u.dialogue_id.as_str()).ok_or_else(|| {
                Error::Invariant(format!("no segments for dialogue `{}`", u.dialogue_id))
            })?;
            let seg = segs
                .iter()
                .find(|s| (s.start..=s.end).contains(&u.turn_index))
                .ok_or_else(|| {
                    Error::Invariant(format!("no segment covers utterance `{}`", u.key()))
                })?;
            items.push(TopicItem::new(
                items.len(),
                u.key(),
                seg_store.require(&seg.key)?.to_vec(),
            ));
        }
    } else {
        let store = load_embeddings(cfg.require_path("embeddings")?, None)?;
        for u in corpus.target_utterances() {
            items.push(TopicItem::new(
                items.len(),
                u.key(),
                store.require(&u.key())?.to_vec(),
            ));
        }
    }
    Ok(items)
}

fn load_pairs(cfg: &PipelineConfig, corpus: &Corpus) -> Result<Vec<PreferencePair>> {
    if !cfg.clustering.use_preferences {
        return Ok(Vec::new());
    }
    match &cfg.paths.preferences {
        Some(path) => load_preferences(path, corpus),
        None => Ok(Vec::new()),
    }
}

/// Run preference-enhanced clustering and write both the anchor (S1) and
/// final assignments.
pub fn cmd_cluster(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let corpus = load_corpus(cfg.require_path("corpus")?)?;
    let items = build_items(cfg, &corpus)?;
    let pairs = load_pairs(cfg, &corpus)?;

    // preference endpoints resolve to the items' own theme vectors
    let item_store = EmbeddingStore::from_entries(
        items.iter().map(|t| (t.key.clone(), t.vector.clone())),
        None,
    )?;
    let outcome = preference_enhanced_cluster(&items, &pairs, &item_store, &cfg.cluster_config())?;

    let mut rows = Vec::with_capacity(2 * items.len());
    for (item, &cluster) in items.iter().zip(&outcome.s1.labels) {
        rows.push(AssignmentRow {
            key: item.key.clone(),
            cluster,
            stage: Stage::S1,
        });
    }
    for (item, &cluster) in items.iter().zip(&outcome.final_assignment.labels) {
        rows.push(AssignmentRow {
            key: item.key.clone(),
            cluster,
            stage: Stage::Final,
        });
    }
    let path = artifact(cfg, ASSIGNMENTS_FILE)?;
    write_file(&path, &jsonl(rows))?;

    let mut artifacts: Vec<PathBuf> = vec![path];
    if cfg.clustering.dump_sp_matrix {
        if let Some(sp) = &outcome.sp {
            let sp_path = artifact(cfg, SP_MATRIX_FILE)?;
            write_file(&sp_path, &sp.to_csv())?;
            artifacts.push(sp_path);
        }
    }
    let refs: Vec<&Path> = artifacts.iter().map(|p| p.as_path()).collect();
    record_stage(cfg, "cluster", started, &refs)
}

fn load_final_assignment(cfg: &PipelineConfig) -> Result<Vec<AssignmentRow>> {
    let path = artifact(cfg, ASSIGNMENTS_FILE)?;
    let rows: Vec<AssignmentRow> = parse_jsonl(&read_file(&path)?, &path.display().to_string())?;
    let finals: Vec<AssignmentRow> = rows
        .into_iter()
        .filter(|r| r.stage == Stage::Final)
        .collect();
    if finals.is_empty() {
        return Err(Error::Invariant(format!(
            "{} carries no final-stage rows",
            path.display()
        )));
    }
    Ok(finals)
}

fn build_client(cfg: &PipelineConfig) -> Result<Box<dyn PromptClient>> {
    match cfg.labeling.client {
        ClientKind::Mock => Ok(Box::new(MockClient::new(cfg.labeling.mock.clone()))),
        ClientKind::Http => Ok(Box::new(HttpClient::new(cfg.client_config())?)),
    }
}

/// The text shown to the labeler for each clustered utterance: its whole
/// segment when segmentation is on, the utterance alone otherwise.
fn member_texts(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    assignment: &[AssignmentRow],
) -> Result<BTreeMap<usize, Vec<String>>> {
    let segments: Option<Vec<SegmentRow>> = if cfg.segmentation.enabled {
        Some(load_segments(cfg)?)
    } else {
        None
    };
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for row in assignment {
        let (dialogue_id, turn) = parse_utterance_key(&row.key)?;
        let dialogue = corpus
            .get(&dialogue_id)
            .ok_or_else(|| Error::Invariant(format!("unknown dialogue `{dialogue_id}`")))?;
        let text = match &segments {
            None => {
                dialogue
                    .turns
                    .get(turn)
                    .ok_or_else(|| Error::Invariant(format!("unknown turn `{}`", row.key)))?
                    .text
                    .clone()
            }
            Some(segments) => {
                let seg = segments
                    .iter()
                    .find(|s| s.dialogue_id == dialogue_id && (s.start..=s.end).contains(&turn))
                    .ok_or_else(|| {
                        Error::Invariant(format!("no segment covers utterance `{}`", row.key))
                    })?;
                Segment {
                    dialogue_id: seg.dialogue_id.clone(),
                    start: seg.start,
                    end: seg.end,
                    representation: Vec::new(),
                }
                .text_in(dialogue)
            }
        };
        members.entry(row.cluster).or_default().push(text);
    }
    Ok(members)
}

/// Generate a theme per cluster and write the themes artifact.
pub fn cmd_label(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let corpus = load_corpus(cfg.require_path("corpus")?)?;
    let assignment = load_final_assignment(cfg)?;
    let members = member_texts(cfg, &corpus, &assignment)?;
    let client = build_client(cfg)?;
    let labeling_cfg = cfg.labeling_config();

    let clusters: Vec<ClusterMembers> = members
        .into_iter()
        .map(|(cluster, texts)| ClusterMembers { cluster, texts })
        .collect();
    let themes: Vec<ThemeLabel> =
        parallel_map(&clusters, labeling_cfg.jobs.max(1), |_, m| {
            generate_theme(m, client.as_ref(), &labeling_cfg)
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let rows: Vec<ThemeRow> = themes
        .into_iter()
        .map(|t| ThemeRow {
            cluster: t.cluster,
            theme: t.text,
            core: t.provenance.core,
            candidates: t.provenance.group_labels,
            cleaned: t.provenance.cleaned,
        })
        .collect();
    let path = artifact(cfg, THEMES_FILE)?;
    write_file(&path, &jsonl(rows))?;
    record_stage(cfg, "label", started, &[&path])
}

/// Score the run against the gold annotations and write the report.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<MetricReport> {
    let started = Instant::now();
    let corpus = load_corpus(cfg.require_path("corpus")?)?;
    let assignment = load_final_assignment(cfg)?;
    let themes_path = artifact(cfg, THEMES_FILE)?;
    let theme_rows: Vec<ThemeRow> =
        parse_jsonl(&read_file(&themes_path)?, &themes_path.display().to_string())?;
    let label_store = load_embeddings(cfg.require_path("label_embeddings")?, None)?;

    let pred = PredRun {
        assignment: assignment
            .iter()
            .map(|r| (r.key.clone(), r.cluster))
            .collect(),
        themes: theme_rows
            .iter()
            .map(|t| (t.cluster, t.theme.clone()))
            .collect(),
    };
    let gold = GoldRun {
        themes: corpus
            .target_utterances()
            .filter_map(|u| u.gold_theme.as_ref().map(|t| (u.key(), t.clone())))
            .collect(),
    };
    let report = evaluate_run(&pred, &gold, &label_store, cfg.evaluation.nmi_normalization)?;

    let path = artifact(cfg, REPORT_FILE)?;
    write_file(
        &path,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("serialize")),
    )?;
    record_stage(cfg, "evaluate", started, &[&path])?;
    Ok(report)
}

/// Chain every stage; any stage error is tagged with the stage name.
pub fn cmd_run_all(cfg: &PipelineConfig) -> Result<MetricReport> {
    if cfg.segmentation.enabled {
        cmd_segment(cfg).map_err(|e| e.with_stage("segment"))?;
    }
    cmd_cluster(cfg).map_err(|e| e.with_stage("cluster"))?;
    cmd_label(cfg).map_err(|e| e.with_stage("label"))?;
    cmd_evaluate(cfg).map_err(|e| e.with_stage("evaluate"))
}

/// Validation report for the `validate` command.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub dialogues: usize,
    pub utterances: usize,
    pub targets: usize,
    pub preference_pairs: usize,
    pub should_link: usize,
    pub cannot_link: usize,
    pub embeddings: usize,
    pub embedding_dim: Option<usize>,
    pub missing_embeddings: usize,
    pub missing_target_embeddings: usize,
}

/// Check the config, load every configured input, and report corpus and
/// coverage statistics without writing artifacts.
pub fn cmd_validate(cfg: &PipelineConfig) -> Result<ValidationSummary> {
    cfg.validate()?;
    let corpus = load_corpus(cfg.require_path("corpus")?)?;
    let store = load_embeddings(cfg.require_path("embeddings")?, None)?;
    let pairs = match &cfg.paths.preferences {
        Some(path) => load_preferences(path, &corpus)?,
        None => Vec::new(),
    };
    if let Some(path) = &cfg.paths.label_embeddings {
        load_embeddings(path, None)?;
    }
    let coverage = coverage_check(&corpus, &store);
    let (should, cannot) = crate::corpus::relation_counts(&pairs);
    Ok(ValidationSummary {
        dialogues: corpus.len(),
        utterances: corpus.utterances().count(),
        targets: corpus.target_utterances().count(),
        preference_pairs: pairs.len(),
        should_link: should,
        cannot_link: cannot,
        embeddings: store.len(),
        embedding_dim: store.dim(),
        missing_embeddings: coverage.missing.len(),
        missing_target_embeddings: coverage.missing_targets.len(),
    })
}
