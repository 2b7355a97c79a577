use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bayesdiff", version, about = "Bayesian differential analysis of peptide intensities")]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this value.
    #[arg(long, global = true, env = "BAYESDIFF_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-peptide posterior of the mean difference (no imputation).
    Univariate(UnivariateArgs),
    /// Joint posterior over peptides with multiple imputation.
    Multivariate(MultivariateArgs),
    /// Simulation benchmarks and timing.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Wide intensity CSV (log scale).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Two-column CSV: sample id, condition.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long = "group-a")]
    pub group_a: Option<String>,
    #[arg(long = "group-b")]
    pub group_b: Option<String>,
    /// Posterior draws per peptide [default: 10000].
    #[arg(long)]
    pub r: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Credible level [default: 0.95].
    #[arg(long)]
    pub level: Option<f64>,
    /// Effect threshold for P(|difference| > tau) [default: 0].
    #[arg(long)]
    pub tau: Option<f64>,
    /// `pooled` or a number [default: pooled].
    #[arg(long)]
    pub mu0: Option<String>,
    /// [default: 1]
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub beta0: Option<f64>,
    /// The data matrix already has its missing values imputed.
    #[arg(long = "data-imputed", num_args = 0..=1, default_missing_value = "true")]
    pub data_imputed: Option<bool>,
    /// Also write every posterior draw.
    #[arg(long = "emit-draws", num_args = 0..=1, default_missing_value = "true")]
    pub emit_draws: Option<bool>,
    /// Also write histogram data.
    #[arg(long = "emit-hist", num_args = 0..=1, default_missing_value = "true")]
    pub emit_hist: Option<bool>,
    /// Histogram bins [default: 50].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file of defaults, keyed by flag name (a run manifest works too).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UnivariateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct MultivariateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Imputation draws [default: 7].
    #[arg(long)]
    pub d: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub nu0: Option<f64>,
    /// `identity`, a positive scale c (c * I), or a labelled matrix CSV [default: identity].
    #[arg(long)]
    pub sigma0: Option<String>,
    /// One block per protein [default: on when the data has a protein column].
    #[arg(long = "by-protein", num_args = 0..=1, default_missing_value = "true")]
    pub by_protein: Option<bool>,
    /// `average` or `mixture` [default: average].
    #[arg(long)]
    pub combine: Option<String>,
    /// Externally imputed copies of --data, one file per imputation.
    #[arg(long, num_args = 1..)]
    pub imputed: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in design label (t2r1..t2r6, t4) or a JSON design file.
    #[arg(long = "design-table")]
    pub design_table: Option<String>,
    /// Replications [default: the design's].
    #[arg(long)]
    pub reps: Option<usize>,
    /// [default: the design's]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Posterior draws per replication [default: 10000].
    #[arg(long)]
    pub r: Option<usize>,
    /// Imputation draws for the multivariate engine [default: 7].
    #[arg(long)]
    pub d: Option<usize>,
    /// [default: average]
    #[arg(long)]
    pub combine: Option<String>,
    /// [default: 0.95]
    #[arg(long)]
    pub level: Option<f64>,
    /// `welch` or `pooled` [default: welch].
    #[arg(long = "t-test")]
    pub t_test: Option<String>,
    /// Comma-separated engines [default: univariate, plus multivariate for P > 1].
    #[arg(long)]
    pub engines: Option<String>,
    /// Also run the runtime sweep.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub timing: Option<bool>,
    /// Peptide counts of the runtime sweep [default: 100,1000,10000].
    #[arg(long = "timing-counts", value_delimiter = ',')]
    pub timing_counts: Option<Vec<usize>>,
    /// [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}
