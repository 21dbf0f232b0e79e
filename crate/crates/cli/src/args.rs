use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Divide-and-conquer Bayesian GLM inference with Wasserstein barycenters.
#[derive(Debug, Parser)]
#[command(name = "wasp-glm", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Sample the full-data posterior.
    FitFull(FitFullArgs),
    /// Partition the data and sample every subset posterior.
    FitDnc(FitDncArgs),
    /// Combine subset draws with the Wasserstein barycenter or DPMC.
    Combine(CombineArgs),
    /// Approximation error (and optionally gain) of combined draws.
    Evaluate(EvaluateArgs),
    /// Full pipeline from a configuration file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// linear, logistic, negbin or multinomial
    #[arg(long)]
    pub family: String,
    /// Number of categories for multinomial data (default: largest label).
    #[arg(long)]
    pub categories: Option<usize>,
    /// Variance of the isotropic Gaussian coefficient prior.
    #[arg(long, default_value_t = 100.0)]
    pub prior_variance: f64,
    /// Scale of the half-normal prior on the negative-binomial dispersion.
    #[arg(long, default_value_t = 5.0)]
    pub dispersion_scale: f64,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 10_000)]
    pub total_iters: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Binomial trials per sample (logistic).
    #[arg(long, default_value_t = 15)]
    pub trials: u32,
    /// Noise standard deviation (linear).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Number of categories (multinomial).
    #[arg(long, default_value_t = 3)]
    pub categories: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitFullArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitDncArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write the subsets that succeeded even if others failed.
    #[arg(long)]
    pub allow_partial: bool,
    /// Directory for subset_<j>.csv, partition.csv and timing.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    /// wasp or dpmc
    #[arg(long, default_value = "wasp")]
    pub method: String,
    /// Subset draw files, in subset order.
    #[arg(long, num_args = 1.., required_unless_present = "subset_dir")]
    pub subsets: Vec<PathBuf>,
    /// Directory holding subset_<j>.csv files.
    #[arg(long, conflicts_with = "subsets")]
    pub subset_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub full: PathBuf,
    #[arg(long)]
    pub combined: PathBuf,
    /// Full-data wall clock in seconds.
    #[arg(long, requires = "t_dnc")]
    pub t_full: Option<f64>,
    /// Divide-and-conquer wall clock in seconds.
    #[arg(long, requires = "t_full")]
    pub t_dnc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub total_iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Comma-separated subset of wasp,dpmc.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_draws: bool,
    /// Combine the subsets that succeeded and flag the run as partial.
    #[arg(long)]
    pub allow_partial: bool,
}
