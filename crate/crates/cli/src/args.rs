use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orthnewton::cost::{make_neg_kurtosis, make_neg_kurtosis_squared, Contrast};
use orthnewton::optimizer::{Mode, OptimizerConfig};

#[derive(Parser, Debug)]
#[command(name = "orthnewton", version, about = "Newton-type ICA on the orthogonal group")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Separate mixed channels read from CSV or WAV files.
    Separate(SeparateArgs),
    /// Run the synthetic three-source protocol over several seeds.
    Bench(BenchArgs),
    /// Report the block structure and sparsity of the Newton system.
    Inspect(InspectArgs),
    /// Generate or mix sources with a seeded mixing matrix.
    Mix(MixArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostChoice {
    /// Negative kurtosis, −κ.
    Kurtosis,
    /// Negative squared kurtosis, −κ².
    Kurtosis2,
}

impl CostChoice {
    pub fn build(self) -> Box<dyn Contrast> {
        match self {
            Self::Kurtosis => Box::new(make_neg_kurtosis()),
            Self::Kurtosis2 => Box::new(make_neg_kurtosis_squared()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Kurtosis => "kurtosis",
            Self::Kurtosis2 => "kurtosis2",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    #[value(alias = "pure-newton")]
    Newton,
    Lm,
}

/// Flags shared by every command that runs the optimizer.
#[derive(Args, Debug, Clone)]
pub struct OptimizerFlags {
    #[arg(long, value_enum, default_value = "kurtosis2")]
    pub cost: CostChoice,
    #[arg(long, value_enum, default_value = "lm")]
    pub mode: ModeChoice,
    #[arg(long, default_value_t = 50.0)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_step: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol_cost: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl OptimizerFlags {
    pub fn config(&self) -> OptimizerConfig {
        let defaults = OptimizerConfig::default();
        OptimizerConfig {
            lambda0: self.lambda0,
            alpha: self.alpha,
            lambda_min: defaults.lambda_min.min(self.lambda0),
            lambda_max: defaults.lambda_max.max(self.lambda0),
            max_iter: self.max_iter,
            tol_step: self.tol_step,
            tol_cost: self.tol_cost,
            mode: match self.mode {
                ModeChoice::Newton => Mode::PureNewton,
                ModeChoice::Lm => Mode::LevenbergMarquardt,
            },
            seed: self.seed,
            ..defaults
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitChoice {
    Identity,
    /// Random orthogonal start drawn from `--seed`.
    Random,
}

#[derive(Args, Debug)]
pub struct SeparateArgs {
    /// CSV file, header row of channel names, one sample per row.
    #[arg(long, conflicts_with = "wav", required_unless_present = "wav")]
    pub input: Option<PathBuf>,
    /// One 16-bit mono WAV file per channel.
    #[arg(long, num_args = 1..)]
    pub wav: Vec<PathBuf>,
    #[command(flatten)]
    pub opt: OptimizerFlags,
    #[arg(long, value_enum, default_value = "identity")]
    pub init: InitChoice,
    /// Score against the mixing matrix `mix --seed` would generate.
    #[arg(long, conflicts_with = "mixing_matrix")]
    pub mixing_seed: Option<u64>,
    /// Score against a mixing matrix file.
    #[arg(long)]
    pub mixing_matrix: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Run exactly this many iterations per trial, ignoring the stopping tests.
    #[arg(long)]
    pub fixed_iters: Option<usize>,
    /// Start each trial 0.04 away from a located minimum and print step norms.
    #[arg(long)]
    pub near_solution: bool,
    #[command(flatten)]
    pub opt: OptimizerFlags,
    /// Directory for the JSON results and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for sparsity.json and nonzeros.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MixArgs {
    /// Comma-separated source kinds: uniform, laplace, twopoint, gaussian.
    #[arg(long, value_delimiter = ',', conflicts_with = "sources", required_unless_present = "sources")]
    pub synthetic: Vec<String>,
    /// Mono 16-bit WAV sources, one per channel.
    #[arg(long, num_args = 1..)]
    pub sources: Vec<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV file for synthetic sources, directory for WAV sources.
    #[arg(long)]
    pub out: PathBuf,
}
