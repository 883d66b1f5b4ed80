use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dereverb::network::ModelKind;
use dereverb::ErrorClass;

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "dereverb",
    version,
    about = "Attention-based speech dereverberation toolkit"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a paired reverberant/anechoic corpus and its manifest.
    Simulate(SimulateArgs),
    /// Compute per-bin normalization statistics of a manifest's reverberant speech.
    Stats(StatsArgs),
    /// Train a model and write a checkpoint plus a per-epoch log.
    Train(TrainArgs),
    /// Dereverberate WAV files with a checkpoint.
    Infer(InferArgs),
    /// Score enhanced files against a manifest, bucketed by RT60.
    Eval(EvalArgs),
    /// Mean attention weight per context offset, by RT60 bucket.
    AttentionReport(AttentionArgs),
    /// Train and evaluate one model per context size.
    SweepContext(SweepArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Directory of clean 16 kHz mono WAVs.
    #[arg(long, conflicts_with = "synthetic")]
    clean_dir: Option<PathBuf>,
    /// Generate this many synthetic clean utterances instead.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Use recorded impulse responses from this directory instead of simulating.
    #[arg(long)]
    rir_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write train/val/test manifests with these sizes, e.g. 160,20,20.
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<usize>>,
    #[arg(long)]
    rt60_min: Option<f64>,
    #[arg(long)]
    rt60_max: Option<f64>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Baseline,
    Fta,
    Sta,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Baseline => ModelKind::Baseline,
            KindArg::Fta => ModelKind::Fta,
            KindArg::Sta => ModelKind::Sta,
        }
    }
}

#[derive(Debug, Args, Clone, Default)]
struct ModelOverrides {
    #[arg(long, value_enum)]
    model: Option<KindArg>,
    #[arg(long, value_enum)]
    rt60_head: Option<Switch>,
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    subbands: Option<usize>,
    /// Hidden widths of the dereverberation network, e.g. 128,128,128.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    #[arg(long)]
    val_manifest: Option<PathBuf>,
    /// Precomputed statistics from `stats`; computed from the training set otherwise.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log path (line-delimited JSON); defaults next to the checkpoint.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    overrides: ModelOverrides,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// WAV files or directories of WAV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Print per-utterance RT60 estimates as JSON lines.
    #[arg(long)]
    dump_rt60: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<id>.wav` for every manifest record.
    #[arg(long)]
    enhanced_dir: PathBuf,
    /// Line-delimited JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AttentionArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// CSV output path; printed to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export every per-frame attention row as line-delimited JSON.
    #[arg(long)]
    dump_weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    #[arg(long)]
    val_manifest: Option<PathBuf>,
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    /// Context sizes to compare.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9,11,13")]
    contexts: Vec<usize>,
    /// Line-delimited JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: ModelOverrides,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
