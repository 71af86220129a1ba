use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "funcov", version, about = "Tests for equality of covariance operators of functional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-sample test on a wide CSV of curves.
    Test(TestArgs),
    /// Monte Carlo size/power study over a parameter grid.
    Simulate(SimulateArgs),
    /// Global test across all pairs of trials in a trial CSV.
    Global(GlobalArgs),
    /// Write simulated data in the CSV formats read by `test` and `global`.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Wide CSV with header `id,group[,pair_id],t0,…`.
    pub input: PathBuf,
    /// File of T timepoints; an equally spaced grid on [0, 1] otherwise.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Paired test, matching curves across groups by `pair_id`.
    #[arg(long)]
    pub paired: bool,
    #[arg(long, default_value_t = 0.99)]
    pub pve: f64,
    /// Permutation replicates; 0 reports only the asymptotic p-value.
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    /// Refit the FPCA inside every permutation replicate.
    #[arg(long)]
    pub full_pipeline_permutation: bool,
    /// Adds a reject decision at this level to the output.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignName {
    Independent,
    Paired,
    Supplement,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub design: DesignName,
    /// Third eigenvalue of group 1 (independent design).
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub gamma: Vec<f64>,
    /// Within-pair score correlation (paired design).
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub rho: Vec<f64>,
    /// null, orthogonal or non-orthogonal (supplement design).
    #[arg(long, value_delimiter = ',', default_value = "null,orthogonal,non-orthogonal")]
    pub scenario: Vec<String>,
    /// Increase of the third eigenvalue in group 2.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub delta: Vec<f64>,
    /// Curves per group (pairs in the paired design).
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    /// Measurement noise variance.
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    pub sigma2: Vec<f64>,
    /// Variance-explained thresholds; several values give a K-sensitivity sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.99")]
    pub pve: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    #[arg(long)]
    pub full_pipeline_permutation: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Grid points per curve.
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// CSV with header `trial,neuron,t0,…`.
    pub input: PathBuf,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0.99)]
    pub pve: f64,
    /// Permutation replicates of each pairwise paired test.
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    /// Trial-label permutations of the global null.
    #[arg(long, default_value_t = 200)]
    pub global_permutations: usize,
    /// Use asymptotic pairwise p-values instead of permutation ones.
    #[arg(long)]
    pub asymptotic_pairwise: bool,
    #[arg(long)]
    pub full_pipeline_permutation: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenerateDesign {
    Independent,
    Paired,
    Supplement,
    Trials,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub design: GenerateDesign,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value = "null")]
    pub scenario: String,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Curves per group, pairs, or neurons per trial.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Number of trials (trials design).
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.25)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[command(flatten)]
    pub common: Common,
}
