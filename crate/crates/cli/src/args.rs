use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use esar_core::features::Role;
use esar_core::llm::{Mode, ProviderAdapter};
use esar_core::parser::{Continuity, LogFormat};

#[derive(Debug, Parser)]
#[command(name = "esar", version, about = "Activity-log scoring and explainable feedback pipeline")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// LLM response text → activity log JSON + repairs sidecar.
    Parse(ParseArgs),
    /// Activity log → validation report.
    Validate(ValidateArgs),
    /// Ground truth + prediction logs → metrics JSON and CSV rows.
    Score(ScoreArgs),
    /// Per-video metric rows → summary table and significance tests.
    Aggregate(AggregateArgs),
    /// Keypoint series → windowed feature matrix.
    Extract(ExtractArgs),
    /// Feature matrix (nurse windows) → isolation forest model.
    Train(TrainArgs),
    /// Model + one window → Shapley attributions.
    Explain(ExplainArgs),
    /// Attributions → student report and alignment bundle.
    Feedback(FeedbackArgs),
    /// Video reference → prompt → LLM → parsed, validated (and scored) log.
    Recognize(RecognizeArgs),
    /// Synthetic logs, LLM responses, keypoints and a split manifest.
    Synth(SynthArgs),
    /// Check that no participant is in both train and test.
    CheckSplit(CheckSplitArgs),
    /// Store a response as a replay fixture for `recognize`.
    Fixture(FixtureArgs),
}

fn parse_format(s: &str) -> Result<LogFormat, String> {
    match s.to_ascii_lowercase().as_str() {
        "a" | "prompt_a" => Ok(LogFormat::A),
        "b" | "prompt_b" => Ok(LogFormat::B),
        _ => Err(format!("unknown log format {s:?} (expected a or b)")),
    }
}

fn parse_continuity(s: &str) -> Result<Continuity, String> {
    match s {
        "require" => Ok(Continuity::Require),
        "stitch" => Ok(Continuity::Stitch),
        "allow-gaps" | "allow_gaps" => Ok(Continuity::AllowGaps),
        _ => Err(format!("unknown continuity mode {s:?} (require, stitch, allow-gaps)")),
    }
}

fn parse_role(s: &str) -> Result<Role, String> {
    s.parse().map_err(|e: esar_core::features::FeatureError| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "live" => Ok(Mode::Live),
        "record" => Ok(Mode::Record),
        "replay" => Ok(Mode::Replay),
        _ => Err(format!("unknown mode {s:?} (live, record, replay)")),
    }
}

fn parse_adapter(s: &str) -> Result<ProviderAdapter, String> {
    match s {
        "generic" => Ok(ProviderAdapter::Generic),
        "chat-completion" | "chat_completion" => Ok(ProviderAdapter::ChatCompletion),
        _ => Err(format!("unknown adapter {s:?} (generic, chat-completion)")),
    }
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Response text files; the video id is the file name up to the first dot.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_parser = parse_format, default_value = "a")]
    pub format: LogFormat,
    /// Override the video id (single input only).
    #[arg(long)]
    pub video_id: Option<String>,
    #[arg(long, value_parser = parse_continuity, default_value = "stitch")]
    pub continuity: Continuity,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Expected number of procedure rounds.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Exit non-zero when any log has violations.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Ground-truth log file or directory of logs.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Prediction log file or directory of logs.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Evaluation horizon in seconds; defaults to the later log end.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Method label for the CSV rows.
    #[arg(long, default_value = "llm")]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// CSV files with `video_id,method,accuracy,f1` rows.
    #[arg(required = true)]
    pub rows: Vec<PathBuf>,
    /// Method every other method is tested against.
    #[arg(long, default_value = "baseline")]
    pub baseline: String,
    /// Also report Welch's unequal-variance test.
    #[arg(long)]
    pub welch: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Keypoint CSV (`frame,joint_id,x,y,conf`) or JSON files.
    pub keypoints: Vec<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Practitioner role; inferred from a leading N/S in the video id when absent.
    #[arg(long, value_parser = parse_role)]
    pub role: Option<Role>,
    /// Session label; inferred from a trailing `T<n>` in the video id when absent.
    #[arg(long)]
    pub session: Option<String>,
    #[arg(long, default_value_t = 17)]
    pub joints: usize,
    /// Window length in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub stride: Option<f64>,
    #[arg(long, default_value_t = esar_core::features::DEFAULT_MISSING_THRESHOLD)]
    pub missing_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(required = true)]
    pub features: Vec<PathBuf>,
    /// Participant split manifest; only train-split nurse windows are used.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub psi: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: PathBuf,
    /// Row to explain; defaults to the highest-scoring window.
    #[arg(long)]
    pub row: Option<usize>,
    /// Background windows; defaults to the nurse windows of `--features`.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long)]
    pub background_size: Option<usize>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default, Clone)]
pub struct LlmFlags {
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long = "llm-model")]
    pub llm_model: Option<String>,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub endpoint_id: Option<String>,
    #[arg(long, value_parser = parse_adapter)]
    pub adapter: Option<ProviderAdapter>,
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeedbackArgs {
    /// `explanation.json` written by `explain`.
    #[arg(long)]
    pub explanation: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Verbalize through the LLM endpoint (falls back to the template).
    #[arg(long)]
    pub llm: bool,
    /// Use this file as the LLM verbalization instead of calling the endpoint.
    #[arg(long)]
    pub llm_response: Option<PathBuf>,
    #[command(flatten)]
    pub endpoint: LlmFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecognizeArgs {
    /// Video path or URI, passed to the endpoint by reference.
    #[arg(long)]
    pub video: String,
    #[arg(long, default_value = "a")]
    pub prompt: String,
    #[arg(long)]
    pub video_id: Option<String>,
    /// Ground-truth log; when given, the parsed log is scored against it.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_parser = parse_continuity, default_value = "stitch")]
    pub continuity: Continuity,
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub endpoint: LlmFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub nurses: usize,
    #[arg(long, default_value_t = 2)]
    pub students: usize,
    #[arg(long, default_value_t = 10.0)]
    pub fps: f64,
    /// Keypoint recording length in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckSplitArgs {
    /// CSV with `participant,session,split` or `video_id,split` columns.
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub video: String,
    #[arg(long, default_value = "a")]
    pub prompt: String,
    /// Response text to store.
    #[arg(long)]
    pub response: PathBuf,
    #[command(flatten)]
    pub endpoint: LlmFlags,
}
