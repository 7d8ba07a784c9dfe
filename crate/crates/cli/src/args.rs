use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "ftpath",
    version,
    about = "Discrete-time Feynman path distributions"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Base seed of all random streams; FT_SEED takes precedence when set.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count, plain or in scientific notation (1e5).
    #[arg(long, global = true, value_parser = parse_count, default_value = "10000")]
    pub samples: usize,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Result file; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the covariance kernel of a time grid.
    Kernel(KernelArgs),
    /// Total mass of the Feynman-Thomas measure and the auxiliary norm.
    Mass(MeasureArgs),
    /// Convergence diagnostics and the existence hypotheses.
    Check(CheckArgs),
    /// Pair the path distribution with a potential phase.
    Pair(PairArgs),
    /// Backward wave-function evolution from a CSV state.
    Evolve(EvolveArgs),
    /// S-matrix element with adiabatic switching.
    Scatter(ScatterArgs),
    /// Run the oracle suite.
    Verify,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    /// Unit-spacing mixed-boundary grid with this many points.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// JSON grid document; overrides --n.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegularizationArgs {
    /// Scale of beta_i = c i^delta.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// Weight exponent of the path space.
    #[arg(long, default_value_t = 4.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 32)]
    pub batches: usize,
    /// Explicit comma-separated beta_i, replacing the power law.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeasureArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub reg: RegularizationArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 4.5)]
    pub gamma: f64,
    /// Largest n of the kappa partial sums.
    #[arg(long, default_value_t = 4096)]
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    Cosine,
    GaussianBump,
    SoftQuartic,
    Tabulated,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PotentialArgs {
    #[arg(long, value_enum, default_value_t = PotentialKind::Zero)]
    pub potential: PotentialKind,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Wavenumber of the cosine potential.
    #[arg(long, default_value_t = 1.0)]
    pub frequency: f64,
    /// Width of the Gaussian bump.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Length scale of the soft quartic.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// CSV table of x, V, V', V'' for the tabulated potential.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScheduleArgs {
    /// Switching rate of lambda_j = exp(-eps j).
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Explicit comma-separated lambda_j, replacing the exponential schedule.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PairArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvolveArgs {
    /// Final state as CSV rows x, re, im on a uniform grid.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving one CSV snapshot per step.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Treat the data as periodic and skip the boundary checks.
    #[arg(long)]
    pub periodic: bool,
    /// Boundary mass ratio that aborts the run.
    #[arg(long, default_value_t = 1e-3)]
    pub leak_threshold: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScatterArgs {
    #[arg(long, default_value_t = 4)]
    pub n_half: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub k_in: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub k_out: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    /// Strictly decreasing switching rates used for the extrapolation.
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
    pub eps_list: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub reg: RegularizationArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub potential: PotentialArgs,
}

/// Sample counts such as `100000` or `1e5`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(1.0..=9.007_199_254_740_992e15).contains(&v) || v.fract() != 0.0 {
        return Err(format!("sample count must be a positive integer, got {s}"));
    }
    Ok(v as usize)
}
