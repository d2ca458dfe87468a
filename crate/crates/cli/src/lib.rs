//! Library half of the `gembed` binary: argument definitions, layered
//! settings, run manifests and the subcommands.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gembed_core::Error;
use gembed_tensor::TensorError;

pub use config::{Layer, Settings};

/// Directory searched for dataset paths that do not exist as given.
pub const DATA_DIR_ENV: &str = "GEMBED_DATA_DIR";

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_COMPAT: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "gembed", version, about = "Gaussian temporal graph embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Edge novelty and snapshot cosine profiles of a dataset.
    Analyze(AnalyzeArgs),
    /// Writes a dynamic stochastic block model edge list.
    GenSbm(GenSbmArgs),
    /// Trains an embedding model and writes its checkpoint and embeddings.
    Train(TrainArgs),
    /// Embeds a dataset with a saved checkpoint.
    Embed(EmbedArgs),
    /// Link prediction MAP/MRR from saved embeddings.
    Eval(EvalArgs),
}

/// Settings shared by every dataset-reading command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Named per-dataset defaults (sbm, reality, uci, slashdot, bitcoin, as).
    #[arg(long)]
    pub preset: Option<String>,
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train/val/test snapshot counts, e.g. 35/5/10.
    #[arg(long)]
    pub split: Option<String>,
    /// Bin raw timestamps into this many equal-width snapshots.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Treat edges as directed (true/false); overrides the file header.
    #[arg(long)]
    pub directed: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of preceding snapshots in the cosine profile [default: 10].
    #[arg(long)]
    pub window: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenSbmArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub communities: usize,
    #[arg(long, default_value_t = 0.2)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 50)]
    pub timestamps: usize,
    #[arg(long, default_value_t = 10)]
    pub migrate_min: usize,
    #[arg(long, default_value_t = 20)]
    pub migrate_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// g2g, dyng2g or transformer [default: transformer].
    #[arg(long)]
    pub model: Option<String>,
    /// Transformer lookback, or an inclusive sweep such as 1..5.
    #[arg(long)]
    pub lookback: Option<String>,
    /// Two-step warm start `theta * W(t-1) + (1 - theta) * W(t-2)`.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    #[arg(long)]
    pub theta3: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub k_per_anchor: Option<usize>,
    /// Triples per optimizer step; 0 takes a whole snapshot.
    #[arg(long)]
    pub batch_triples: Option<usize>,
    #[arg(long)]
    pub binarize: Option<bool>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output file; `.csv` writes text, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    pub embeddings: PathBuf,
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Repeat classifier training and ranking with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Also write the attention report of this node id (needs --checkpoint).
    #[arg(long)]
    pub attention_node: Option<String>,
    /// Transformer checkpoint used for the attention report.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub clf_lr: Option<f64>,
    #[arg(long)]
    pub clf_epochs: Option<usize>,
    #[arg(long)]
    pub neg_factor: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { .. } | Error::Parse { .. } | Error::Empty(_) | Error::OutOfRange(_) => EXIT_INPUT,
                Error::Diverged(_) => EXIT_NUMERIC,
                Error::Config(_) => EXIT_CONFIG,
                Error::Dimension(_) | Error::Checkpoint(_) => EXIT_COMPAT,
                Error::Tensor(TensorError::NonFinite { .. }) => EXIT_NUMERIC,
                Error::Tensor(_) => EXIT_COMPAT,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_INPUT;
        }
    }
    1
}

/// Joins the cause chain, dropping causes already quoted by their parent.
pub fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            exit_code(&e)
        }
    }
}
