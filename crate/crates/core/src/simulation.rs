//! Synthetic benchmarks: data generation, the frequentist comparator, the
//! replication harness and runtime scaling.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::group::{GroupData, MaskedMatrix};
use crate::inference::{
    multivariate_by_protein, multivariate_difference, univariate_difference, MultivariateOptions,
    DEFAULT_R,
};
use crate::prior::PriorConfig;
use crate::rng::RngStream;
use crate::samples::{Combine, DifferenceSamples, Engine};
use crate::stats::mean_sd;
use crate::summary::{summarize, PosteriorSummary};
use crate::student_t::cholesky_lower;

pub const BASELINE_LABEL: &str = "baseline";
pub const TREATMENT_LABEL: &str = "treatment";

/// Correlation structure of the treatment group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Covariance {
    Identity,
    /// `diagonal * I + offdiagonal * J` (J the all-ones matrix).
    Compound { diagonal: f64, offdiagonal: f64 },
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    pub fn matrix(&self, dim: usize) -> Result<DMatrix<f64>> {
        match self {
            Covariance::Identity => Ok(DMatrix::identity(dim, dim)),
            Covariance::Compound {
                diagonal,
                offdiagonal,
            } => Ok(DMatrix::identity(dim, dim) * *diagonal
                + DMatrix::from_element(dim, dim, *offdiagonal)),
            Covariance::Full(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::InvalidInput(format!(
                        "covariance must be {dim}x{dim}"
                    )));
                }
                Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
        }
    }
}

/// One simulated design: baseline `N(0, I)` against treatment
/// `N(effect * 1, variance * covariance)`, `samples` draws per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub label: String,
    pub effect: f64,
    pub variance: f64,
    #[serde(default = "default_covariance")]
    pub covariance: Covariance,
    pub samples: usize,
    #[serde(default = "one")]
    pub peptides: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Probability that a cell is missing (completely at random).
    #[serde(default)]
    pub missing_rate: f64,
    /// Peptides per protein; `None` puts all peptides in one protein.
    #[serde(default)]
    pub block_size: Option<usize>,
}

fn default_covariance() -> Covariance {
    Covariance::Identity
}

fn one() -> usize {
    1
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidInput("samples per group must be >= 2".into()));
        }
        if self.peptides == 0 || self.replications == 0 {
            return Err(Error::InvalidInput("peptides and replications must be >= 1".into()));
        }
        if !(self.variance.is_finite() && self.variance > 0.0) || !self.effect.is_finite() {
            return Err(Error::InvalidInput("effect must be finite and variance > 0".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::InvalidInput("missing_rate must lie in [0, 1)".into()));
        }
        if self.block_size == Some(0) {
            return Err(Error::InvalidInput("block_size must be >= 1".into()));
        }
        let positive_definite = match self.covariance {
            Covariance::Identity => true,
            // Eigenvalues are `diagonal` and `diagonal + P * offdiagonal`.
            Covariance::Compound { diagonal, offdiagonal } => {
                diagonal > 0.0 && diagonal + self.peptides as f64 * offdiagonal > 0.0
            }
            Covariance::Full(_) => {
                let cov = self.covariance.matrix(self.peptides)?;
                (&cov - cov.transpose()).amax() <= 1e-12 && cov.cholesky().is_some()
            }
        };
        if !positive_definite {
            return Err(Error::InvalidInput(
                "covariance must be symmetric positive-definite".into(),
            ));
        }
        Ok(())
    }

    fn table2(label: &str, effect: f64, variance: f64) -> Self {
        Self {
            label: label.into(),
            effect,
            variance,
            covariance: Covariance::Identity,
            samples: 5,
            peptides: 1,
            replications: 1000,
            seed: 0,
            missing_rate: 0.0,
            block_size: None,
        }
    }

    /// Built-in designs by label.
    pub fn builtin(label: &str) -> Option<Self> {
        Some(match label {
            "t2r1" => Self::table2(label, 1.0, 1.0),
            "t2r2" => Self::table2(label, 5.0, 1.0),
            "t2r3" => Self::table2(label, 10.0, 1.0),
            "t2r4" => Self::table2(label, 1.0, 5.0),
            "t2r5" => Self::table2(label, 1.0, 10.0),
            "t2r6" => Self::table2(label, 1.0, 20.0),
            "t4" => Self {
                covariance: Covariance::Compound {
                    diagonal: 0.9,
                    offdiagonal: 0.1,
                },
                peptides: 10,
                ..Self::table2(label, 1.0, 1.0)
            },
            _ => return None,
        })
    }

    pub fn builtin_labels() -> &'static [&'static str] {
        &["t2r1", "t2r2", "t2r3", "t2r4", "t2r5", "t2r6", "t4"]
    }

    /// Engines benchmarked by default for this design.
    pub fn default_engines(&self) -> Vec<Engine> {
        if self.peptides > 1 {
            vec![Engine::Univariate, Engine::Multivariate]
        } else {
            vec![Engine::Univariate]
        }
    }
}

/// Baseline and treatment groups for one replication.
pub fn generate_groups(config: &SimConfig, rng: &RngStream) -> Result<(GroupData, GroupData)> {
    config.validate()?;
    let p = config.peptides;
    let n = config.samples;
    let mut gen = rng.rng();
    let row_sampler = RowSampler::new(&config.covariance, config.variance, p)?;

    let baseline = DMatrix::from_fn(n, p, |_, _| gen.sample::<f64, _>(StandardNormal));
    let mut treatment = DMatrix::zeros(n, p);
    for i in 0..n {
        let row = row_sampler.draw(&mut gen);
        for j in 0..p {
            treatment[(i, j)] = config.effect + row[j];
        }
    }

    let ids: Vec<String> = (0..p).map(|j| format!("pep{j:05}")).collect();
    let block = config.block_size.unwrap_or(p);
    let proteins: Vec<String> = (0..p).map(|j| format!("prot{:05}", j / block)).collect();
    let mut make = |label: &str, m: &DMatrix<f64>| -> Result<GroupData> {
        let mut masked = MaskedMatrix::complete(m)?;
        if config.missing_rate > 0.0 {
            for j in 0..p {
                for i in 0..n {
                    if gen.random::<f64>() < config.missing_rate {
                        masked.set_missing(i, j);
                    }
                }
            }
        }
        GroupData::new(label, ids.clone(), Some(proteins.clone()), masked)
    };
    let b = make(BASELINE_LABEL, &baseline)?;
    let t = make(TREATMENT_LABEL, &treatment)?;
    Ok((b, t))
}

/// Zero-mean correlated rows; identity and non-negative compound symmetry
/// avoid the dense `P x P` factor.
enum RowSampler {
    Independent { sd: f64, dim: usize },
    SharedFactor { sd: f64, shared_sd: f64, dim: usize },
    Dense(DMatrix<f64>),
}

impl RowSampler {
    fn new(cov: &Covariance, variance: f64, dim: usize) -> Result<Self> {
        match *cov {
            Covariance::Identity => Ok(Self::Independent { sd: variance.sqrt(), dim }),
            Covariance::Compound { diagonal, offdiagonal } if offdiagonal >= 0.0 && diagonal > 0.0 => {
                Ok(Self::SharedFactor {
                    sd: (variance * diagonal).sqrt(),
                    shared_sd: (variance * offdiagonal).sqrt(),
                    dim,
                })
            }
            _ => Ok(Self::Dense(cholesky_lower(&(cov.matrix(dim)? * variance))?)),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, gen: &mut R) -> DVector<f64> {
        match *self {
            Self::Independent { sd, dim } => {
                DVector::from_fn(dim, |_, _| sd * gen.sample::<f64, _>(StandardNormal))
            }
            Self::SharedFactor { sd, shared_sd, dim } => {
                let common = shared_sd * gen.sample::<f64, _>(StandardNormal);
                DVector::from_fn(dim, |_, _| common + sd * gen.sample::<f64, _>(StandardNormal))
            }
            Self::Dense(ref factor) => {
                let z = DVector::from_fn(factor.nrows(), |_, _| gen.sample::<f64, _>(StandardNormal));
                factor * z
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TTestKind {
    #[default]
    Welch,
    Pooled,
}

/// Two-sided two-sample t-test p-value.
///
/// When both samples have zero variance the p-value is 1 for equal means and
/// 0 otherwise.
pub fn t_test(a: &[f64], b: &[f64], kind: TTestKind) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("t-test needs at least two values per sample".into()));
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (va, vb) = (sa * sa, sb * sb);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if va == 0.0 && vb == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let (se, df) = match kind {
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), df)
        }
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((sp2 * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
    };
    let t = (ma - mb) / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Engine settings used by the harness.
#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub prior: PriorConfig,
    pub r: usize,
    pub d_count: usize,
    pub combine: Combine,
    pub level: f64,
    pub t_test: TTestKind,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            prior: PriorConfig::default(),
            r: DEFAULT_R,
            d_count: crate::imputation::DEFAULT_DRAWS,
            combine: Combine::Average,
            level: 0.95,
            t_test: TTestKind::Welch,
        }
    }
}

/// Metrics of one replication, averaged over the design's peptides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub mean_difference: f64,
    pub ci_width: f64,
    pub p_value: f64,
    pub rmse: f64,
    /// Percentage of peptides whose interval covers the true effect.
    pub coverage: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> Self {
        let (mean, sd) = mean_sd(xs);
        Self { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub design: String,
    pub engine: Engine,
    pub replications: usize,
    pub mean_difference: MeanSd,
    pub ci_width: MeanSd,
    pub p_value: MeanSd,
    pub rmse: MeanSd,
    pub cic95: MeanSd,
}

const TAG_GENERATE: u64 = 1;
const TAG_INFER: u64 = 2;

fn infer(
    treatment: &GroupData,
    baseline: &GroupData,
    engine: Engine,
    opts: &BenchOptions,
    rng: &RngStream,
) -> Result<DifferenceSamples> {
    match engine {
        Engine::Univariate => univariate_difference(treatment, baseline, &opts.prior, opts.r, rng),
        Engine::Multivariate => {
            let mopts = MultivariateOptions {
                d_count: opts.d_count,
                r: opts.r,
                combine: opts.combine,
            };
            let blocked = treatment
                .proteins
                .as_ref()
                .is_some_and(|p| p.iter().any(|x| *x != p[0]));
            if blocked {
                multivariate_by_protein(treatment, baseline, &opts.prior, &mopts, rng)
            } else {
                multivariate_difference(treatment, baseline, &opts.prior, &mopts, rng)
            }
        }
    }
}

fn replication(
    config: &SimConfig,
    engine: Engine,
    opts: &BenchOptions,
    rep: usize,
) -> Result<ReplicationMetrics> {
    let root = RngStream::from_seed(config.seed).derive(&[rep as u64]);
    let (baseline, treatment) = generate_groups(config, &root.derive(&[TAG_GENERATE]))?;
    let samples = infer(&treatment, &baseline, engine, opts, &root.derive(&[TAG_INFER]))?;
    if samples.n_peptides() != config.peptides {
        return Err(Error::InvalidInput(format!(
            "replication {rep}: only {} of {} peptides analysed",
            samples.n_peptides(),
            config.peptides
        )));
    }
    let summary: PosteriorSummary = summarize(&samples, opts.level, 0.0);
    let m = config.effect;
    let k = summary.peptides.len() as f64;
    let mut p_values = Vec::with_capacity(summary.peptides.len());
    for j in 0..config.peptides {
        let t = treatment.matrix.observed_column(j);
        let b = baseline.matrix.observed_column(j);
        p_values.push(t_test(&t, &b, opts.t_test).unwrap_or(f64::NAN));
    }
    Ok(ReplicationMetrics {
        mean_difference: summary.peptides.iter().map(|s| s.mean).sum::<f64>() / k,
        ci_width: summary.peptides.iter().map(|s| s.width()).sum::<f64>() / k,
        p_value: p_values.iter().sum::<f64>() / p_values.len() as f64,
        rmse: (summary.peptides.iter().map(|s| (s.mean - m).powi(2)).sum::<f64>() / k).sqrt(),
        coverage: 100.0 * summary.peptides.iter().filter(|s| s.covers(m)).count() as f64 / k,
    })
}

/// Per-replication metrics, in replication order. Replication `i` draws its
/// data from the stream `(seed, i)` whatever the engine, so two engines run
/// on the same config see identical datasets.
pub fn run_replications(
    config: &SimConfig,
    engine: Engine,
    opts: &BenchOptions,
) -> Result<Vec<ReplicationMetrics>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|rep| replication(config, engine, opts, rep))
        .collect()
}

pub fn aggregate(design: &str, engine: Engine, reps: &[ReplicationMetrics]) -> BenchmarkRow {
    let col = |f: fn(&ReplicationMetrics) -> f64| -> MeanSd {
        MeanSd::of(&reps.iter().map(f).collect::<Vec<_>>())
    };
    BenchmarkRow {
        design: design.to_string(),
        engine,
        replications: reps.len(),
        mean_difference: col(|r| r.mean_difference),
        ci_width: col(|r| r.ci_width),
        p_value: col(|r| r.p_value),
        rmse: col(|r| r.rmse),
        cic95: col(|r| r.coverage),
    }
}

pub fn run_benchmark(config: &SimConfig, engine: Engine, opts: &BenchOptions) -> Result<BenchmarkRow> {
    let reps = run_replications(config, engine, opts)?;
    Ok(aggregate(&config.label, engine, &reps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimedMethod {
    Univariate,
    Multivariate,
    TTest,
}

#[derive(Clone, Debug)]
pub struct TimingOptions {
    pub bench: BenchOptions,
    pub samples: usize,
    /// Peptides per protein block for the multivariate engine.
    pub block_size: usize,
    /// Runs per cell; the median is reported.
    pub runs: usize,
    pub seed: u64,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            bench: BenchOptions::default(),
            samples: 5,
            block_size: 10,
            runs: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub peptides: usize,
    pub method: TimedMethod,
    pub seconds: f64,
}

/// Wall-clock seconds (median over runs) of one full analysis per
/// `(peptide count, method)`, excluding data generation.
pub fn run_timing(
    counts: &[usize],
    methods: &[TimedMethod],
    opts: &TimingOptions,
) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &count in counts {
        if count == 0 {
            return Err(Error::InvalidInput("peptide counts must be >= 1".into()));
        }
        let config = SimConfig {
            label: format!("timing-{count}"),
            effect: 1.0,
            variance: 1.0,
            covariance: Covariance::Identity,
            samples: opts.samples,
            peptides: count,
            replications: 1,
            seed: opts.seed,
            missing_rate: 0.0,
            block_size: Some(opts.block_size),
        };
        let (baseline, treatment) = generate_groups(&config, &RngStream::from_seed(opts.seed))?;
        for &method in methods {
            let mut times = Vec::with_capacity(opts.runs.max(1));
            for _ in 0..opts.runs.max(1) {
                let start = Instant::now();
                time_one(method, &treatment, &baseline, &opts.bench, opts.seed)?;
                times.push(start.elapsed().as_secs_f64());
            }
            times.sort_by(f64::total_cmp);
            rows.push(TimingRow {
                peptides: count,
                method,
                seconds: times[times.len() / 2],
            });
        }
    }
    Ok(rows)
}

fn time_one(
    method: TimedMethod,
    treatment: &GroupData,
    baseline: &GroupData,
    opts: &BenchOptions,
    seed: u64,
) -> Result<()> {
    let rng = RngStream::from_seed(seed);
    match method {
        TimedMethod::TTest => {
            let p: Vec<f64> = (0..treatment.n_peptides())
                .into_par_iter()
                .map(|j| {
                    t_test(
                        &treatment.matrix.observed_column(j),
                        &baseline.matrix.observed_column(j),
                        opts.t_test,
                    )
                    .unwrap_or(f64::NAN)
                })
                .collect();
            std::hint::black_box(p);
        }
        TimedMethod::Univariate => {
            let s = univariate_difference(treatment, baseline, &opts.prior, opts.r, &rng)?;
            std::hint::black_box(summarize(&s, opts.level, 0.0));
        }
        TimedMethod::Multivariate => {
            let mopts = MultivariateOptions {
                d_count: opts.d_count,
                r: opts.r,
                combine: opts.combine,
            };
            let s = multivariate_by_protein(treatment, baseline, &opts.prior, &mopts, &rng)?;
            std::hint::black_box(summarize(&s, opts.level, 0.0));
        }
    }
    Ok(())
}
