//! Command-line flags. Every subcommand's flags can also be given in the
//! `--config` JSON file under a section named after the subcommand, using the
//! flag names with `_` in place of `-`. Flags on the command line win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(name = "surgscope", version, about = "Analytics over per-frame surgical scene detections")]
pub struct Cli {
    /// JSON config file with one section per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log filter, e.g. `info` or `surgscope=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with ground truth.
    Synth(SynthArgs),
    /// Track hands in scene streams.
    Track(TrackArgs),
    /// Per-hand skill metrics of tie clips and group centroids.
    Skill(SkillArgs),
    /// Aggregate signatures per procedure class.
    Signature(SignatureArgs),
    /// Thirty-feature vectors of procedures.
    Featurize(FeaturizeArgs),
    /// Discriminant projection of a feature table.
    Lda(LdaArgs),
    /// Select catalog entries with a procedure rule.
    Filter(FilterArgs),
    /// Score predicted streams against ground truth.
    Eval(EvalArgs),
    /// Streaming latency against the real-time budgets.
    Bench(BenchArgs),
    /// Generate, analyze and evaluate a synthetic cohort end to end.
    Run(RunArgs),
}

impl Command {
    pub fn section(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Track(_) => "track",
            Command::Skill(_) => "skill",
            Command::Signature(_) => "signature",
            Command::Featurize(_) => "featurize",
            Command::Lda(_) => "lda",
            Command::Filter(_) => "filter",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
            Command::Run(_) => "run",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Frame rate of skill videos.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub videos_per_class: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operators_per_group: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clips_per_operator: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub corruption: CorruptionArgs,
    /// Full generator spec; config file only.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<Value>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionArgs {
    /// Probability of dropping each detection.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    /// Gaussian jitter of box corners and keypoints, pixels.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter_px: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_mean: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_sd: Option<f64>,
    /// Probability of replacing a frame's action label.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action_flip: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerArgs {
    /// Minimum IoU to keep a track/detection match.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_age: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_hits: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_noise: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackArgs {
    /// Stream file or directory of stream files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Output directory for track files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tracker: TrackerArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillArgs {
    /// Track file or directory of track files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracks: Option<PathBuf>,
    /// JSON list of clip definitions.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clips: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// `clip_mean` or `per_frame`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pose_gap_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortArgs {
    /// Stream file or directory of stream files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// JSON object mapping video id to class.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_map: Option<PathBuf>,
    /// Timeline step length, seconds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SignatureArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cohort: CohortArgs,
    /// Output CSV file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cohort: CohortArgs,
    /// Output CSV file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaArgs {
    /// Labelled feature CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterArgs {
    /// Catalog JSONL file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Built-in rule: appendectomy, pilonidal or thyroidectomy.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// JSON rule file, instead of a built-in rule.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_file: Option<PathBuf>,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalArgs {
    /// Predicted stream file or directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred: Option<PathBuf>,
    /// Ground-truth stream file or directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Comma-separated subset of actions, boxes, keypoints.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<String>>,
    /// PCK threshold as a fraction of hand size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// IoU at which a predicted box counts as a true positive.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou_threshold: Option<f64>,
    /// Hand box used for PCK normalization: `gt` or `dt`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action_resolution_s: Option<f64>,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchArgs {
    /// Stream file to replay; a synthetic stream is generated when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_s: Option<f64>,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tracker: TrackerArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RunArgs {
    /// Output directory of the report bundle.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_s: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub corruption: CorruptionArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub tracker: TrackerArgs,
    /// Full pipeline configuration; config file only.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<Value>,
}
