//! Pipeline configuration: a JSON file with per-stage sections, every field
//! defaulted, CLI flags overriding their config counterparts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{Aggregation, ClusterConfig, PrmConfig, ReductionMethod, SpMode};
use crate::error::{Error, Result};
use crate::evaluation::NmiNormalization;
use crate::labeling::{ClientConfig, LabelingConfig, MockRules};
use crate::segmentation::{AdaptConfig, ValleyPolicy};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub preferences: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub label_embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationSection {
    pub enabled: bool,
    pub margin: f64,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub projection_dim: Option<usize>,
    pub tiling: ValleyPolicy,
}

impl Default for SegmentationSection {
    fn default() -> Self {
        SegmentationSection {
            enabled: true,
            margin: 0.1,
            window: 2,
            negatives_per_positive: 3,
            learning_rate: 5e-6,
            epochs: 3,
            projection_dim: None,
            tiling: ValleyPolicy::Depth,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringSection {
    pub k: usize,
    pub theta_link: f64,
    pub theta_split: f64,
    pub sp_mode: SpMode,
    pub reduction: ReductionMethod,
    pub reduction_dim: Option<usize>,
    pub aggregation: Aggregation,
    pub prm_learning_rate: f64,
    pub prm_epochs: usize,
    pub use_preferences: bool,
    pub gsp_mode: bool,
    pub dump_sp_matrix: bool,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        let prm = PrmConfig::default();
        ClusteringSection {
            k: 30,
            theta_link: 0.85,
            theta_split: 0.15,
            sp_mode: SpMode::default(),
            reduction: ReductionMethod::default(),
            reduction_dim: None,
            aggregation: Aggregation::default(),
            prm_learning_rate: prm.learning_rate,
            prm_epochs: prm.epochs,
            use_preferences: true,
            gsp_mode: false,
            dump_sp_matrix: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingSection {
    pub group_size: usize,
    pub flat: bool,
    pub client: ClientKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: usize,
    pub parallelism: usize,
    pub backoff_base_ms: u64,
    pub timeout_ms: u64,
    pub mock: MockRules,
}

impl Default for LabelingSection {
    fn default() -> Self {
        let client = ClientConfig::default();
        LabelingSection {
            group_size: 25,
            flat: false,
            client: ClientKind::Mock,
            endpoint: client.endpoint,
            model: client.model,
            temperature: client.temperature,
            max_retries: client.max_retries,
            parallelism: client.parallelism,
            backoff_base_ms: client.backoff_base_ms,
            timeout_ms: client.timeout_ms,
            mock: MockRules::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    pub nmi_normalization: NmiNormalization,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub segmentation: SegmentationSection,
    pub clustering: ClusteringSection,
    pub labeling: LabelingSection,
    pub evaluation: EvaluationSection,
    pub seed: u64,
    pub jobs: usize,
}

// stage seeds derive from the one config seed via fixed offsets
const SEED_OFFSET_SEGMENT: u64 = 1;
const SEED_OFFSET_CLUSTER: u64 = 2;
const SEED_OFFSET_LABEL: u64 = 3;
const SEED_OFFSET_EVALUATE: u64 = 4;

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clustering.k < 2 {
            return Err(Error::Config(format!(
                "clustering.k must be at least 2, got {}",
                self.clustering.k
            )));
        }
        if self.clustering.theta_split >= self.clustering.theta_link {
            return Err(Error::Config(format!(
                "clustering.theta_split {} must be below clustering.theta_link {}",
                self.clustering.theta_split, self.clustering.theta_link
            )));
        }
        if self.labeling.group_size < 1 {
            return Err(Error::Config("labeling.group_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.clustering.theta_link)
            || !(0.0..=1.0).contains(&self.clustering.theta_split)
        {
            return Err(Error::Config("tendency thresholds must be in [0,1]".into()));
        }
        if self.segmentation.margin <= 0.0 {
            return Err(Error::Config("segmentation.margin must be positive".into()));
        }
        Ok(())
    }

    pub fn segment_seed(&self) -> u64 {
        self.seed.wrapping_add(SEED_OFFSET_SEGMENT)
    }

    pub fn cluster_seed(&self) -> u64 {
        self.seed.wrapping_add(SEED_OFFSET_CLUSTER)
    }

    pub fn label_seed(&self) -> u64 {
        self.seed.wrapping_add(SEED_OFFSET_LABEL)
    }

    pub fn evaluate_seed(&self) -> u64 {
        self.seed.wrapping_add(SEED_OFFSET_EVALUATE)
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        AdaptConfig {
            margin: self.segmentation.margin,
            window: self.segmentation.window,
            negatives_per_positive: self.segmentation.negatives_per_positive,
            learning_rate: self.segmentation.learning_rate,
            epochs: self.segmentation.epochs,
            projection_dim: self.segmentation.projection_dim,
            seed: self.segment_seed(),
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            k: self.clustering.k,
            theta_link: self.clustering.theta_link,
            theta_split: self.clustering.theta_split,
            sp_mode: self.clustering.sp_mode,
            reduction: self.clustering.reduction,
            reduction_dim: self.clustering.reduction_dim,
            aggregation: self.clustering.aggregation,
            prm: PrmConfig {
                learning_rate: self.clustering.prm_learning_rate,
                epochs: self.clustering.prm_epochs,
            },
            gsp_mode: self.clustering.gsp_mode,
            seed: self.cluster_seed(),
        }
    }

    pub fn labeling_config(&self) -> LabelingConfig {
        LabelingConfig {
            group_size: self.labeling.group_size,
            flat: self.labeling.flat,
            seed: self.label_seed(),
            jobs: if self.jobs == 0 {
                self.labeling.parallelism
            } else {
                self.jobs
            },
        }
    }

    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            endpoint: self.labeling.endpoint.clone(),
            model: self.labeling.model.clone(),
            temperature: self.labeling.temperature,
            max_retries: self.labeling.max_retries,
            parallelism: self.labeling.parallelism,
            backoff_base_ms: self.labeling.backoff_base_ms,
            timeout_ms: self.labeling.timeout_ms,
        }
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.paths
            .output_dir
            .as_deref()
            .ok_or_else(|| Error::Config("paths.output_dir is not set".into()))
    }

    pub fn require_path(&self, which: &str) -> Result<&Path> {
        let p = match which {
            "corpus" => self.paths.corpus.as_deref(),
            "preferences" => self.paths.preferences.as_deref(),
            "embeddings" => self.paths.embeddings.as_deref(),
            "label_embeddings" => self.paths.label_embeddings.as_deref(),
            _ => None,
        };
        p.ok_or_else(|| Error::Config(format!("paths.{which} is not set")))
    }
}
