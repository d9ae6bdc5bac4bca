//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "trde", version, about = "Tensor-ring density estimation")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "TRD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint.
    Fit(FitArgs),
    /// Draw samples from a checkpoint, in original data units.
    Sample(SampleArgs),
    /// Mean NLL of a data split, optionally with histogram KL.
    Eval(EvalArgs),
    /// Marginal or conditional density on a grid.
    Marginal(MarginalArgs),
    /// List canonical circular permutations.
    Perms(PermsArgs),
    /// Sweep K, rank and components.
    Bench(BenchArgs),
    /// Write points from a toy generator.
    GenToy(GenToyArgs),
}

/// Where the data comes from; shared by `fit`, `eval` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Toy family (two-spirals, checkerboard, rings, ...).
    #[arg(long, conflicts_with = "csv")]
    pub toy: Option<String>,
    /// Numeric CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Skip the first CSV line.
    #[arg(long)]
    pub header: bool,
    /// Rows generated for a toy family.
    #[arg(long)]
    pub n: Option<usize>,
    /// Toy noise level.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Validation fraction.
    #[arg(long)]
    pub validation: Option<f64>,
    /// Test fraction.
    #[arg(long)]
    pub test: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(short = 'k', long)]
    pub k_basis: Option<usize>,
    #[arg(short = 'r', long)]
    pub rank: Option<usize>,
    /// Mixture components (circular permutation classes).
    #[arg(short = 'm', long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// sgd or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Per-epoch CSV report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Lossy JSON view of the checkpoint.
    #[arg(long)]
    pub export_json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(short, long)]
    pub checkpoint: PathBuf,
    #[arg(short, long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// train, validation or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Seed of the toy generator and the split shuffle (default: the
    /// training seed stored in the checkpoint).
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Reference samples (CSV, original units) for histogram KL.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Model samples drawn for KL.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    /// Sampling seed for KL.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bins per dimension for KL (default: 100 up to D = 2, else 50).
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MarginalArgs {
    #[arg(short, long)]
    pub checkpoint: PathBuf,
    /// Data dimensions kept on the grid (at most two), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub free: Vec<usize>,
    /// Conditioning values `dim=value` in unit-cube coordinates.
    #[arg(long = "fix")]
    pub fix: Vec<String>,
    /// Grid points per free dimension (cell midpoints).
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Output CSV (default: stdout).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PermsArgs {
    #[arg(short, long)]
    pub dims: usize,
    /// Maximum number of permutations; larger sets are subsampled.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Required only when a subset is drawn.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(short = 'k', long, value_delimiter = ',', default_value = "16,64")]
    pub k_basis: Vec<usize>,
    #[arg(short = 'r', long, value_delimiter = ',', default_value = "2,4")]
    pub rank: Vec<usize>,
    #[arg(short = 'm', long, value_delimiter = ',', default_value = "1")]
    pub components: Vec<usize>,
    /// Dimension used for parameter counts when no data is given.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Only count parameters; no training.
    #[arg(long)]
    pub params_only: bool,
    #[arg(long, default_value_t = 1e-2)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 20)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Samples drawn to time the sampler.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (default: stdout).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenToyArgs {
    /// Toy family.
    #[arg(long)]
    pub family: String,
    #[arg(short, long)]
    pub n: usize,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}
