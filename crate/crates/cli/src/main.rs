//! `xplmark`: evaluate explanation masks, explain detectors with Kernel SHAP
//! over supervoxels, and run the user-study statistics.

mod commands;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::failure::Failure;
use crate::manifest::{digest, manifest_path, InputDigest, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "xplmark", version, about = "Video explanation-mask evaluation and Kernel SHAP toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print a JSON result on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Variance, inter-frame and intra-frame consistency, centredness.
    Metrics(MetricsArgs),
    /// 2D superpixels per frame or 3D supervoxels over the clip.
    Segment(SegmentArgs),
    /// Kernel SHAP attributions over segments.
    Shap(ShapArgs),
    /// Per-frame normalization of a mask or signed map sequence.
    Normalize(NormalizeArgs),
    /// Split a signed map into fake and real masks.
    Split(SplitArgs),
    /// Upscale, sum and renormalize masks of several resolutions.
    Aggregate(AggregateArgs),
    /// Exact two-tailed sign test with Bonferroni correction.
    Signtest(SigntestArgs),
    /// Vote totals and percentages per explainer.
    Votes(InputArgs),
    /// ROC AUC and balanced accuracy of classifier scores.
    Auc(AucArgs),
    /// Select stable videos from face-box tracks.
    PoolFilter(PoolFilterArgs),
    /// Blend masks onto video frames in red.
    Overlay(OverlayArgs),
    /// Pick evenly spaced frames from a clip or mask sequence.
    SampleFrames(SampleFramesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SeqFormat {
    Mskp,
    Pgm,
}

#[derive(Debug, Args, Serialize)]
struct MetricsArgs {
    /// Mask sequences (.mskp files or PGM frame directories); a directory of
    /// .mskp files is expanded.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Force the input format instead of detecting it.
    #[arg(long, value_enum)]
    format: Option<SeqFormat>,
    #[arg(long, default_value_t = 0.1)]
    shift_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    inner_area: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SegmentMode {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "3d")]
    ThreeD,
}

#[derive(Debug, Args, Serialize)]
struct SegmentArgs {
    /// Directory of PNG frames.
    #[arg(long)]
    video: PathBuf,
    #[arg(long, value_enum, default_value = "3d")]
    mode: SegmentMode,
    #[arg(long, default_value_t = 100)]
    segments: usize,
    #[arg(long, default_value_t = 10.0)]
    compactness: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    temporal_scale: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ShapModeArg {
    Videowise,
    Framewise,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScoreSpaceArg {
    Raw,
    Logit,
}

#[derive(Debug, Args, Serialize)]
struct ShapArgs {
    /// Directory of PNG frames.
    #[arg(long)]
    video: PathBuf,
    /// Label volume written by `segment`.
    #[arg(long)]
    labels: PathBuf,
    /// toy:linear:FILE | toy:brightness | cmd:"executable args..."
    #[arg(long)]
    predictor: String,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "videowise")]
    mode: ShapModeArg,
    #[arg(long, value_enum, default_value = "raw")]
    score_space: ScoreSpaceArg,
    /// Frames per predictor request.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormalizeMode {
    /// Signed maps: divide each frame by its largest magnitude.
    Extreme,
    /// Masks: divide each frame by its maximum.
    Max,
}

#[derive(Debug, Args, Serialize)]
struct NormalizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: NormalizeMode,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    /// Signed map sequence; writes `<id>_fake.mskp` and `<id>_real.mskp` into --out.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AggregateArgs {
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SigntestArgs {
    #[arg(long, requires = "b_wins", conflicts_with = "votes")]
    a_wins: Option<u64>,
    #[arg(long, requires = "a_wins")]
    b_wins: Option<u64>,
    /// Names for the hypothesis `A > B`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    names: Option<Vec<String>>,
    /// Votes CSV: test every explainer pair, Bonferroni factor = pair count.
    #[arg(long)]
    votes: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    bonferroni: u32,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AucArgs {
    /// Scores CSV with header `score,label`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args, Serialize)]
struct PoolFilterArgs {
    /// Box CSV with header `video_id,frame_idx,left,top,right,bottom,frame_w,frame_h`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = xplmark_core::selection::DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args, Serialize)]
struct OverlayArgs {
    /// Directory of PNG frames.
    #[arg(long)]
    video: PathBuf,
    /// Mask sequence (.mskp or PGM directory).
    #[arg(long)]
    mask: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SampleFramesArgs {
    /// PNG frame directory, .mskp file or PGM frame directory.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    count: usize,
}

/// What a command produced: a JSON value, a human summary, artifacts
/// written, and the inputs they depend on.
pub struct Outcome {
    pub json: serde_json::Value,
    pub text: String,
    pub artifacts: Vec<PathBuf>,
    pub inputs: Vec<PathBuf>,
}

pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Metrics(_) => "metrics",
            Command::Segment(_) => "segment",
            Command::Shap(_) => "shap",
            Command::Normalize(_) => "normalize",
            Command::Split(_) => "split",
            Command::Aggregate(_) => "aggregate",
            Command::Signtest(_) => "signtest",
            Command::Votes(_) => "votes",
            Command::Auc(_) => "auc",
            Command::PoolFilter(_) => "pool-filter",
            Command::Overlay(_) => "overlay",
            Command::SampleFrames(_) => "sample-frames",
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    let g = Globals {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let outcome = match &cli.command {
        Command::Metrics(a) => commands::metrics(a, &g),
        Command::Segment(a) => commands::segment(a, &g),
        Command::Shap(a) => commands::shap(a, &g),
        Command::Normalize(a) => commands::normalize(a, &g),
        Command::Split(a) => commands::split(a, &g),
        Command::Aggregate(a) => commands::aggregate(a, &g),
        Command::Signtest(a) => commands::signtest(a, &g),
        Command::Votes(a) => commands::votes(a, &g),
        Command::Auc(a) => commands::auc(a, &g),
        Command::PoolFilter(a) => commands::pool_filter(a, &g),
        Command::Overlay(a) => commands::overlay(a, &g),
        Command::SampleFrames(a) => commands::sample_frames(a, &g),
    }?;

    if !outcome.artifacts.is_empty() {
        let inputs = outcome
            .inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: digest(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
                })
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let m = RunManifest {
            subcommand: cli.command.name().to_string(),
            parameters: serde_json::to_value(&cli.command).expect("arguments serialize"),
            inputs,
            seed: cli.seed,
            threads: cli.threads,
            tool_version: env!("CARGO_PKG_VERSION"),
            duration_ms: started.elapsed().as_millis(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        for a in &outcome.artifacts {
            let path = manifest_path(a);
            std::fs::write(&path, &text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        }
    }

    if cli.json {
        println!("{}", serde_json::to_string_pretty(&outcome.json).expect("result serializes"));
    } else if !outcome.text.is_empty() {
        println!("{}", outcome.text.trim_end());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("xplmark: {f}");
            ExitCode::from(f.code())
        }
    }
}
