//! `catch` — controllable theme detection pipeline over dialogue corpora.
//!
//! Subcommands mirror the pipeline stages; every flag overrides its config
//! counterpart. Exit codes: 0 success, 1 config error, 2 data error,
//! 3 client error, 4 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use catch_core::clustering::SpMode;
use catch_core::config::ClientKind;
use catch_core::pipeline;
use catch_core::segmentation::ValleyPolicy;
use catch_core::PipelineConfig;

#[derive(Parser)]
#[command(name = "catch", version, about = "Controllable theme detection over dialogue corpora")]
struct Cli {
    /// Pipeline config file (JSON); defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    /// Corpus JSONL path
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Preference-pair JSONL path
    #[arg(long, global = true)]
    preferences: Option<PathBuf>,

    /// Utterance embeddings JSONL path
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,

    /// Label embeddings JSONL path
    #[arg(long, global = true)]
    label_embeddings: Option<PathBuf>,

    /// Directory for run artifacts
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Master seed; stage seeds derive from it
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Global worker bound
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Number of clusters
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Linking tendency threshold
    #[arg(long, global = true)]
    theta_link: Option<f64>,

    /// Splitting tendency threshold
    #[arg(long, global = true)]
    theta_split: Option<f64>,

    /// SP kernel direction: paper_literal or inverted
    #[arg(long, global = true, value_parser = parse_sp_mode)]
    sp_mode: Option<SpMode>,

    /// Members per labeling group
    #[arg(long, global = true)]
    group_size: Option<usize>,

    /// Labeling client: mock or http
    #[arg(long, global = true, value_parser = parse_client_kind)]
    client: Option<ClientKind>,

    /// Chat-completion endpoint URL
    #[arg(long, global = true)]
    endpoint: Option<String>,

    /// Chat-completion model name
    #[arg(long, global = true)]
    model: Option<String>,

    /// Adaptation epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,

    /// Adaptation learning rate
    #[arg(long, global = true)]
    learning_rate: Option<f64>,

    /// Absolute tiling threshold on the boundary score (switches tiling mode)
    #[arg(long, global = true)]
    tiling_threshold: Option<f64>,

    /// Ablation: clustering ignores preference pairs
    #[arg(long, global = true)]
    no_prefs: bool,

    /// Ablation: cluster raw utterance vectors, skipping segmentation
    #[arg(long, global = true)]
    no_segmentation: bool,

    /// Ablation: flat label generation instead of the hierarchy
    #[arg(long, global = true)]
    flat_labels: bool,
}

fn parse_sp_mode(s: &str) -> Result<SpMode, String> {
    match s {
        "paper_literal" => Ok(SpMode::PaperLiteral),
        "inverted" => Ok(SpMode::Inverted),
        other => Err(format!("unknown sp mode `{other}` (paper_literal|inverted)")),
    }
}

fn parse_client_kind(s: &str) -> Result<ClientKind, String> {
    match s {
        "mock" => Ok(ClientKind::Mock),
        "http" => Ok(ClientKind::Http),
        other => Err(format!("unknown client `{other}` (mock|http)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Segment dialogues and emit segment representations
    Segment,
    /// Cluster theme representations under preference guidance
    Cluster,
    /// Generate a theme label per cluster
    Label,
    /// Score the run against gold annotations
    Evaluate,
    /// Run every stage in order
    RunAll,
    /// Check the config and input files without writing artifacts
    Validate,
}

impl Overrides {
    fn apply(self, cfg: &mut PipelineConfig) {
        if let Some(p) = self.corpus {
            cfg.paths.corpus = Some(p);
        }
        if let Some(p) = self.preferences {
            cfg.paths.preferences = Some(p);
        }
        if let Some(p) = self.embeddings {
            cfg.paths.embeddings = Some(p);
        }
        if let Some(p) = self.label_embeddings {
            cfg.paths.label_embeddings = Some(p);
        }
        if let Some(p) = self.output_dir {
            cfg.paths.output_dir = Some(p);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(k) = self.k {
            cfg.clustering.k = k;
        }
        if let Some(t) = self.theta_link {
            cfg.clustering.theta_link = t;
        }
        if let Some(t) = self.theta_split {
            cfg.clustering.theta_split = t;
        }
        if let Some(m) = self.sp_mode {
            cfg.clustering.sp_mode = m;
        }
        if let Some(g) = self.group_size {
            cfg.labeling.group_size = g;
        }
        if let Some(c) = self.client {
            cfg.labeling.client = c;
        }
        if let Some(e) = self.endpoint {
            cfg.labeling.endpoint = e;
        }
        if let Some(m) = self.model {
            cfg.labeling.model = m;
        }
        if let Some(e) = self.epochs {
            cfg.segmentation.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            cfg.segmentation.learning_rate = lr;
        }
        if let Some(t) = self.tiling_threshold {
            cfg.segmentation.tiling = ValleyPolicy::Absolute { threshold: t };
        }
        if self.no_prefs {
            cfg.clustering.use_preferences = false;
        }
        if self.no_segmentation {
            cfg.segmentation.enabled = false;
        }
        if self.flat_labels {
            cfg.labeling.flat = true;
        }
    }
}

fn run(cli: Cli) -> catch_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;

    match cli.command {
        Command::Segment => pipeline::cmd_segment(&cfg)?,
        Command::Cluster => pipeline::cmd_cluster(&cfg)?,
        Command::Label => pipeline::cmd_label(&cfg)?,
        Command::Evaluate => {
            let report = pipeline::cmd_evaluate(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serialize"));
        }
        Command::RunAll => {
            let report = pipeline::cmd_run_all(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serialize"));
        }
        Command::Validate => {
            let summary = pipeline::cmd_validate(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serialize"));
            if summary.missing_target_embeddings > 0 {
                eprintln!(
                    "warning: {} target utterance(s) lack embeddings; segmentation will refuse to run",
                    summary.missing_target_embeddings
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
