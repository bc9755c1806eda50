use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

use ced_core::distillation::StudentView;
use ced_core::features::MixupMode;

/// Exit code for runtime failures.
const EXIT_RUNTIME: u8 = 1;
/// Exit code for usage and validation errors.
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "ced", version, about = "Consistent-teaching logit distillation for audio tagging")]
struct Cli {
    /// Worker threads for feature extraction; 1 forces the sequential path.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled synthetic WAV corpus.
    Synth(SynthArgs),
    /// Run the teacher over every (sample, stored epoch) slot and write a logit store.
    Extract(ExtractArgs),
    /// Train a student from a logit store, without labels.
    Train(TrainArgs),
    /// Score a trained student against evaluation labels.
    Eval(EvalArgs),
    /// Print a store's header and storage breakdown.
    Inspect(InspectArgs),
    /// Re-extract a subset of slots and check records and replayed views.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct FeatureArgs {
    /// Feature config file (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the config's mixup mode.
    #[arg(long, value_enum)]
    mixup: Option<MixupArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MixupArg {
    Off,
    Beta,
    Fixed,
}

impl From<MixupArg> for MixupMode {
    fn from(m: MixupArg) -> Self {
        match m {
            MixupArg::Off => MixupMode::Off,
            MixupArg::Beta => MixupMode::Beta,
            MixupArg::Fixed => MixupMode::Fixed,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ViewArg {
    Replay,
    Clean,
    Independent,
}

impl From<ViewArg> for StudentView {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Replay => StudentView::Replay,
            ViewArg::Clean => StudentView::Clean,
            ViewArg::Independent => StudentView::Independent,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for WAV files, index.txt and labels.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 24)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    clip_seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory; the store is written to `<out>/store.ceds` unless `--store` is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    top_k: u16,
    #[arg(long, default_value_t = 10)]
    stored_epochs: u16,
    /// Master seed for per-slot augmentation seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Teacher ensemble seed; defaults to `--seed`.
    #[arg(long)]
    teacher_seed: Option<u64>,
    #[arg(long, default_value_t = 24)]
    classes: usize,
    /// Feed the teacher clean clips instead of augmented views.
    #[arg(long)]
    clean_teacher: bool,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for model.bin, loss.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    warmup_steps: u64,
    /// Seeds student initialization and sample order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Student input for each stored slot.
    #[arg(long, value_enum, default_value_t = ViewArg::Replay)]
    view: ViewArg,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// CSV of (sample_id, class_id) pairs; defaults to `<corpus>/labels.csv`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory for ap.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    store: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Number of randomly chosen samples to check; all samples when omitted.
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for choosing the subset.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for a report manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<ced_core::Error>() {
        Some(e) if e.is_validation() => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CED_LOG", "warn")).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
