//! `aligner`: synthetic corpora, feature extraction, CTC training, alignment,
//! duration-model training and evaluation as separate subcommands.

mod commands;
mod config;
mod error;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use aligner_core::ctc::AlignPolicy;
use aligner_core::features::FeatureKind;
use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::workspace::{Workspace, VERSION};

#[derive(Debug, Parser)]
#[command(name = "aligner", version = VERSION, about = "CTC phoneme duration alignment pipeline")]
struct Cli {
    /// Workspace root for features, checkpoints, alignments, reports and run manifests.
    #[arg(long, global = true, env = "ALIGNER_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// TOML pipeline configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-utterance stages (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed propagated to every stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic tone corpus with known durations.
    Synth(SynthArgs),
    /// Extract feature files for every manifest entry.
    Features(FeaturesArgs),
    /// Train the CTC acoustic model.
    TrainAsr(TrainAsrArgs),
    /// Align a corpus with a trained acoustic model.
    Align(AlignArgs),
    /// Train the duration predictor on alignments.
    TrainDuration(TrainDurationArgs),
    /// Compute boundary, transcript and cepstral metrics.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corpus spec (TOML, or JSON by extension).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Defaults to `<corpus_dir>/manifest.jsonl` from the config.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<FeatureKind>,
    /// Defaults to `<workspace>/features/<kind>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainAsrArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Precomputed `<id>.feat` files; features are extracted from audio otherwise.
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<FeatureKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Defaults to `<workspace>/checkpoints/asr.tnsr`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<AlignPolicy>,
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    /// Defaults to `<workspace>/alignments/alignments.jsonl`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainDurationArgs {
    #[arg(long)]
    pub alignments: Option<PathBuf>,
    /// Supplies per-phoneme styles for records that carry none.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Defaults to `<workspace>/checkpoints/duration.tnsr`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted alignments; needs `--manifest` with reference durations.
    #[arg(long)]
    pub alignments: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `id<TAB>symbols` per line.
    #[arg(long, requires = "hyp_transcripts")]
    pub ref_transcripts: Option<PathBuf>,
    #[arg(long, requires = "ref_transcripts")]
    pub hyp_transcripts: Option<PathBuf>,
    /// Directory of reference `<id>.feat` cepstra.
    #[arg(long, requires = "hyp_features")]
    pub ref_features: Option<PathBuf>,
    #[arg(long, requires = "ref_features")]
    pub hyp_features: Option<PathBuf>,
    /// Align cepstral frames by DTW instead of truncating.
    #[arg(long)]
    pub dtw: bool,
}

fn parse_kind(s: &str) -> Result<FeatureKind, String> {
    match s {
        "melspec" => Ok(FeatureKind::Melspec),
        "mfcc" => Ok(FeatureKind::Mfcc),
        "latent" => Ok(FeatureKind::Latent),
        other => Err(format!("unknown feature kind '{other}' (melspec, mfcc, latent)")),
    }
}

fn parse_policy(s: &str) -> Result<AlignPolicy, String> {
    s.parse().map_err(|e: aligner_core::Error| e.to_string())
}

/// Everything a subcommand needs besides its own arguments.
pub struct Context {
    pub config: PipelineConfig,
    pub workspace: Workspace,
}

fn context(cli: &Cli) -> CliResult<Context> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    }
    .finalize(cli.seed)?;
    let root = cli
        .workspace
        .clone()
        .or_else(|| config.paths.workspace.clone())
        .unwrap_or_else(|| PathBuf::from("workspace"));
    Ok(Context {
        config,
        workspace: Workspace::new(root),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let ctx = context(&cli)?;
    match cli.command {
        Command::Synth(a) => commands::synth(ctx, a),
        Command::Features(a) => commands::features(ctx, a),
        Command::TrainAsr(a) => commands::train_asr(ctx, a),
        Command::Align(a) => commands::align(ctx, a),
        Command::TrainDuration(a) => commands::train_duration(ctx, a),
        Command::Eval(a) => commands::eval(ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
