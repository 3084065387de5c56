//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Estimate customer patience, virtual-wait, and abandonment-signaling
/// parameters from censored queue data; validate estimators by simulation;
/// evaluate abandonment classifiers; and compute staffing arithmetic.
#[derive(Debug, Parser)]
#[command(name = "patience", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an estimator to an observation file and print a JSON result.
    Estimate(EstimateArgs),
    /// Generate a synthetic observation CSV from the exponential model.
    Simulate(SimulateArgs),
    /// Monte Carlo accuracy benchmark of all estimators over a config grid.
    Benchmark(BenchmarkArgs),
    /// Feature selection, scorer training, and ROC/threshold analysis.
    ClassifyEval(ClassifyEvalArgs),
    /// Steady-state abandonment-queue performance and staffing search.
    Staffing(StaffingArgs),
    /// Per-bucket patience estimates grouped by a covariate.
    GroupPatience(GroupPatienceArgs),
}

/// Flags shared by the fitting commands; unset values fall back to the
/// config file named by PATIENCE_CONFIG, then to built-in defaults.
#[derive(Debug, Args)]
pub struct FitFlags {
    /// Convergence tolerance (sum of absolute parameter changes) [default: 1e-6]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iteration ceiling [default: 10000]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Master random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Observation CSV (header u,y,delta,x1,...,xk; u in decimal minutes) or,
    /// with --events, a JSONL event log
    pub input: PathBuf,
    /// Estimator: em, em-cov, m1, or m2
    #[arg(long, default_value = "em")]
    pub method: String,
    /// Treat INPUT as a JSONL conversation event log
    #[arg(long)]
    pub events: bool,
    /// Resolution of uncertain observations for m1/m2:
    /// as-served, as-abandoned (m1), or as-sab (m2)
    #[arg(long, default_value = "as-served")]
    pub usab_policy: String,
    /// Covariate columns for em-cov (default: all columns in the file)
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Bootstrap resamples for 95% CIs; bare --bootstrap uses the configured
    /// default (500), omit the flag to skip the bootstrap
    #[arg(long, num_args = 0..=1, default_missing_value = "default")]
    pub bootstrap: Option<String>,
    /// Worker threads for the bootstrap [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Primary display unit for rates: hr or min [default: hr]
    #[arg(long)]
    pub unit: Option<String>,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Patience rate θ per hour
    #[arg(long)]
    pub theta: f64,
    /// Virtual-wait rate γ per hour
    #[arg(long)]
    pub gamma: f64,
    /// Signaling probability q
    #[arg(long)]
    pub q: f64,
    /// Observations to generate
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Probability a served customer is recorded as uncertain; default ties
    /// it to the customer's own signaling draw (1 − q)
    #[arg(long)]
    pub p_sr1: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the observation CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Config grid: "reference" (14 cells: q from 1.0 to 0.1 at θ=4/hr,
    /// γ=10/hr, plus γ ∈ {9,7,5,4.1} at q=0.1)
    #[arg(long, default_value = "reference")]
    pub grid: String,
    /// Replications per grid cell
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Observations per replication
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the per-cell/per-estimator summary CSV here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the plot-data CSV (p_sab,estimator,mse_theta,mse_gamma,mse_q)
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct ClassifyEvalArgs {
    /// Feature CSV: conv_id,customer:<tok>,...,agent:<tok>,...,meta:<m>,...,label
    #[arg(long)]
    pub features: PathBuf,
    /// Token columns kept per party by mutual-information ranking
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Classification threshold on the fitted score [default: 0.47]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Write the ROC points CSV (fpr,tpr,threshold) here
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Scorer training seed (training itself is deterministic) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StaffingArgs {
    /// Arrival rate λ per hour
    #[arg(long)]
    pub lambda: f64,
    /// Per-server service rate μ per hour
    #[arg(long)]
    pub mu: f64,
    /// Abandonment rate θ per hour of waiting customers
    #[arg(long)]
    pub theta: f64,
    /// Evaluate performance at this server count
    #[arg(long, conflicts_with_all = ["target_abandon", "target_wait"])]
    pub n: Option<u32>,
    /// Search the minimal server count with p_abandon ≤ this bound
    #[arg(long, conflicts_with = "target_wait")]
    pub target_abandon: Option<f64>,
    /// Search the minimal server count with p_wait ≤ this bound
    #[arg(long)]
    pub target_wait: Option<f64>,
    /// Server-count ceiling for the search
    #[arg(long, default_value_t = 1_000_000)]
    pub max_n: u32,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GroupPatienceArgs {
    /// Observation CSV with covariate columns
    pub input: PathBuf,
    /// Covariate column to bucket by
    #[arg(long)]
    pub by: String,
    /// Ascending bucket upper edges, e.g. 1,10,20,30,40,50
    #[arg(long, value_delimiter = ',')]
    pub buckets: Vec<f64>,
    /// Write the per-bucket CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitFlags,
}
