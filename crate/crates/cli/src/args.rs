use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// CP low-rank tensor regression and autoregression.
///
/// Every command is a pure function of its input files, flags and seed, and
/// writes a `manifest.txt` next to its outputs.
#[derive(Debug, Parser)]
#[command(name = "tcpr", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a tensor regression (DGP 1) or TAR(1) (DGP 2) sample.
    Simulate(SimulateArgs),
    /// Fit the CP low-rank (or sparse CP low-rank) estimator.
    Fit(FitArgs),
    /// Rolling one-step forecasts over the tail of a data set.
    Forecast(ForecastArgs),
    /// Time-series cross-validation over ranks and sparsity levels.
    Cv(CvArgs),
    /// Spectral radius of a TAR coefficient tensor.
    Stationarity(StationarityArgs),
    /// Export interaction heatmaps and weights of a fitted tensor.
    Heatmap(HeatmapArgs),
    /// Per-iteration cost of ISTA against the alternating fitter.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dgp {
    Regression,
    Tar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    /// Gaussian unit loadings.
    Random,
    /// Vectorized Lasso pilot, then greedy rank-one deflation.
    Lasso,
    /// Ridge pilot, then a CP fit of the pilot.
    Ridge,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// Random seed; falls back to TCPR_SEED, then 0.
    #[arg(long, env = "TCPR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dgp: Dgp,
    /// Common mode size.
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub rank: usize,
    /// Non-zeros per loading vector.
    #[arg(long)]
    pub s0: Option<usize>,
    /// Number of responses to write.
    #[arg(long)]
    pub t: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Spectral radius the TAR coefficients are rescaled to.
    #[arg(long, default_value_t = 0.8)]
    pub radius: f64,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    /// Modes of each response (and predictor).
    #[arg(long, default_value_t = 3)]
    pub modes: usize,
    /// Drop the innovations: `Y_t = <B, X_t>` exactly. Predictor files are
    /// written for both DGPs.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Estimator flags shared by `fit`, `forecast` and `cv`.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Directory with `Y_####.tzt` (and optionally `X_####.tzt`) files.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of response modes.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = InitKind::Random)]
    pub init: InitKind,
    /// Extra random starts for `fit`; the lowest final loss wins.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    /// Lasso penalty as a fraction of lambda_max (`--init lasso`).
    #[arg(long, default_value_t = 0.1)]
    pub lasso_frac: f64,
    #[arg(long, default_value_t = 100)]
    pub ista_iters: usize,
    /// Ridge penalty relative to the mean squared predictor norm (`--init ridge`).
    #[arg(long, default_value_t = 1e-3)]
    pub ridge: f64,
    /// Relative objective decrease that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long)]
    pub rank: usize,
    /// Per-mode sparsity caps `s1,...,sN`.
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Option<Vec<usize>>,
    /// Number of trailing pairs forecast one step ahead.
    #[arg(long)]
    pub test_length: usize,
    /// Fit once on the initial window instead of refitting at every step.
    #[arg(long)]
    pub no_refit: bool,
    /// File with one group label per response entry (canonical order).
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// Candidate ranks.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    /// Candidate sparsity vectors separated by `;`, each `s1,...,sN` or `none`.
    #[arg(long, default_value = "none")]
    pub sparsity_sets: String,
    #[arg(long)]
    pub val_length: usize,
    /// Worker threads for the grid cells (1 runs sequentially).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StationarityArgs {
    /// Coefficient tensor (`.cpt`).
    #[arg(long)]
    pub coef: PathBuf,
    /// Lag order L.
    #[arg(long, default_value_t = 1)]
    pub lags: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Also write `stationarity.csv` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub coef: PathBuf,
    /// Comma-separated `r:d1xd2` triples, 1-based (e.g. `1:1x4,2:2x5`).
    #[arg(long, value_delimiter = ',', required = true)]
    pub pairs: Vec<String>,
    /// Multiply each matrix by its component weight.
    #[arg(long)]
    pub scale: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,5,6,7")]
    pub ps: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 100)]
    pub t: usize,
    /// Timed iterations per method and p.
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    #[arg(long)]
    pub s0: Option<usize>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}
