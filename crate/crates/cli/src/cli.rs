use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "skelact",
    version,
    about = "Skeleton-sequence action recognition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset from a directory of keypoint export files and a label manifest.
    Ingest(IngestArgs),
    /// Apply dynamic frame dropout to a dataset.
    Dfd(DfdArgs),
    /// Append augmented copies to a dataset.
    Augment(AugmentArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train a model from a run configuration.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run the design-choice ablation or an augmentation-size sweep.
    Ablate(AblateArgs),
    /// Compare analytic and finite-difference gradients on a tiny model.
    Gradcheck(GradcheckArgs),
    /// Render loss and accuracy curves from a curves CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of `<clip_id>.json` export documents.
    #[arg(long)]
    pub exports: PathBuf,
    /// CSV manifest with `clip_id,class_name` rows.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keypoint confidence threshold.
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    /// Also write the dataset as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DfdArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 15.0)]
    pub cutoff: f64,
    /// Per-clip frame counts as CSV.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Copies per original, by mode.
    #[arg(long, default_value_t = 0)]
    pub translate: usize,
    #[arg(long, default_value_t = 0)]
    pub scale: usize,
    #[arg(long, default_value_t = 0)]
    pub noise: usize,
    #[arg(long, default_value_t = 0)]
    pub affine: usize,
    #[arg(long, default_value_t = 20.0)]
    pub translate_range: f64,
    #[arg(long, default_value_t = 0.8)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 1.2)]
    pub scale_max: f64,
    #[arg(long, default_value_t = 2.0)]
    pub noise_sigma: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 30)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 60)]
    pub max_frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the dataset as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Train one model per BLSTM depth, e.g. `3,5,7`.
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Write the metrics as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bootstrap_trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; defaults to `ablation.csv` (or `augment_sizes.csv`) in the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Augmentation-size sweep instead of the variant table, e.g. `0,430,860`.
    /// Each size must be a multiple of the number of training clips.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pass if every kind's maximum relative error is below this.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Perturb the analytic gradient; the check is expected to fail.
    #[arg(long)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `curves.csv` written by `train`.
    #[arg(long)]
    pub curves: PathBuf,
    /// Directory for `loss.svg` and `accuracy.svg`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Dfd(a) => commands::dfd(&a),
        Command::Augment(a) => commands::augment(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Report(a) => commands::report(&a),
    }
}
