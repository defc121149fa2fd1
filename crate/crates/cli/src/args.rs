use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spdgauss", version, about = "Riemannian Gaussian distributions on SPD matrices and Siegel domains")]
pub struct Cli {
    /// Master seed; required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output path; stdout when omitted (no manifest then).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// log z_β(σ) over a σ grid for one or more methods.
    Logz(LogzArgs),
    /// φ(σ) = σ³ d/dσ log z_β(σ) over a σ grid.
    Phi(LogzArgs),
    /// Riemannian Gaussian samples as JSON lines.
    Sample(SampleArgs),
    /// Fréchet mean and σ̂ for a JSON-lines data set.
    Fit(FitArgs),
    /// σ-recovery experiment for one of the reference tables.
    Experiment(ExperimentArgs),
    /// Limiting eigenvalue density and a pooled-eigenvalue CDF comparison.
    Spectrum(SpectrumArgs),
    /// Siegel distances between paired (or broadcast) points.
    SiegelDist(SiegelDistArgs),
    /// log z of the acosh-normal ensemble.
    SiegelLogz(SiegelLogzArgs),
    /// Riemannian Gaussian samples on the Siegel domain.
    SiegelSample(SiegelSampleArgs),
}

#[derive(Debug, Args)]
pub struct LogzArgs {
    #[arg(long)]
    pub beta: u32,
    #[arg(long)]
    pub n: usize,
    /// A value, a comma list, or `start:stop:step` (inclusive).
    #[arg(long)]
    pub sigma: String,
    /// Comma list of exact, pfaffian, trilog, trilog-corrected, mc.
    #[arg(long, default_value = "exact")]
    pub methods: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Single-coordinate updates discarded before the first draw.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Single-coordinate updates between draws.
    #[arg(long)]
    pub thinning: Option<usize>,
    /// Random-walk step size.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub beta: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub count: usize,
    /// JSON-lines file whose first record is the center (default identity).
    #[arg(long)]
    pub mean: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "trilog")]
    pub method: String,
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    /// Weight λ of the optional penalty λ(σ − σ₀)².
    #[arg(long, requires = "penalty_sigma0")]
    pub penalty_lambda: Option<f64>,
    #[arg(long, requires = "penalty_lambda")]
    pub penalty_sigma0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub table: u32,
    /// Override the true σ values (comma list or range).
    #[arg(long)]
    pub sigmas: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub beta: u32,
    #[arg(long)]
    pub n: usize,
    /// 't Hooft coupling t = Nσ².
    #[arg(long)]
    pub t: f64,
    /// Matrices sampled for the empirical CDF.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Grid points for the density table.
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    #[command(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Args)]
pub struct SiegelDistArgs {
    #[arg(long)]
    pub a: PathBuf,
    /// Paired with `a` record by record, or a single point used for all.
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct SiegelLogzArgs {
    #[arg(long)]
    pub beta: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub sigma: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
}

#[derive(Debug, Args)]
pub struct SiegelSampleArgs {
    #[arg(long)]
    pub beta: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub count: usize,
    /// JSON-lines file whose first record is the center (default 0).
    #[arg(long)]
    pub center: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
}
