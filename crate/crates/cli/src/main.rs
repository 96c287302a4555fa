mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use segmatch::Error;

/// Segment-level video-to-music retrieval.
#[derive(Debug, Parser)]
#[command(name = "segmatch", version)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SEGMATCH_THREADS")]
    pub threads: Option<usize>,

    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Run configuration file (JSON). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Leave wall-clock timings out of every artifact.
    #[arg(long, global = true)]
    pub no_timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired catalog.
    Synth(SynthArgs),
    /// Check that a manifest and the files it references are consistent.
    Validate(ValidateArgs),
    /// Segment every clip of a manifest and cache per-segment features.
    Segment(SegmentArgs),
    /// Train the two-branch network on cached segments.
    Train(TrainArgs),
    /// Embed cached segments with a trained checkpoint.
    Embed(EmbedArgs),
    /// Rank the music catalog for one video query.
    Rank(RankArgs),
    /// Evaluate retrieval over a test catalog.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Total clips; split into train, validation and test in that order.
    #[arg(long)]
    pub clips: usize,
    #[arg(long, default_value_t = 0)]
    pub val: usize,
    #[arg(long, default_value_t = 0)]
    pub test: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub audio_dim: Option<usize>,
    #[arg(long)]
    pub video_dim: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub vocabulary: Option<usize>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub min_segments: Option<usize>,
    #[arg(long)]
    pub max_segments: Option<usize>,
    #[arg(long)]
    pub min_duration: Option<f64>,
    #[arg(long)]
    pub max_duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Segment cache to write.
    #[arg(long)]
    pub out: PathBuf,
    /// `foote`, `fixed`, `whole_clip`, or the name of an annotation set.
    #[arg(long)]
    pub segmenter: Option<String>,
    /// Modality the boundaries are computed on.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub kernel_half_width: Option<usize>,
    #[arg(long)]
    pub taper_std: Option<f64>,
    #[arg(long)]
    pub peak_threshold: Option<f64>,
    #[arg(long)]
    pub min_segment_frames: Option<usize>,
    #[arg(long)]
    pub fixed_length: Option<usize>,
    /// Also write every clip's boundaries to this JSON file.
    #[arg(long)]
    pub boundaries: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training segment cache.
    #[arg(long)]
    pub segments: PathBuf,
    /// Validation segment cache; without one the last tenth of the
    /// training clips is held out.
    #[arg(long)]
    pub val_segments: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines training log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub lambda_vm: Option<f64>,
    #[arg(long)]
    pub lambda_mv: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub min_delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub same_clip_negatives: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Use the checkpoint even if it was trained with another segmenter.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Clip id of the video query.
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value = "trace")]
    pub distance: String,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Catalog size; the first N clips of the embeddings file.
    #[arg(short = 'n', long)]
    pub catalog_size: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// `vanilla`, `crop_query`, `stretch_targets`, `crop_stretch` or `all`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Comma-separated distance names.
    #[arg(long, value_delimiter = ',')]
    pub distances: Option<Vec<String>>,
    #[arg(short = 'n', long)]
    pub catalog_size: Option<usize>,
    #[arg(long)]
    pub nw_indel: Option<f64>,
    #[arg(long)]
    pub sw_indel: Option<f64>,
    /// Report file (JSON array).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<commands::UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<Error>(),
                    Some(Error::CatalogTooSmall { .. } | Error::Config(_))
                );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
