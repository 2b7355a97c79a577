use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bayesdiff::dataio;
use bayesdiff::inference::{DEFAULT_LEVEL, DEFAULT_R};
use bayesdiff::simulation::{
    run_benchmark, run_timing, BenchOptions, BenchmarkRow, SimConfig, TTestKind, TimedMethod,
    TimingOptions, TimingRow,
};
use bayesdiff::{
    multivariate_by_protein_with, multivariate_difference_with, summarize, univariate_difference,
    Combine, DifferenceSamples, Engine, GroupData, Imputer, Mu0, MultivariateOptions,
    PriorConfig, RngStream, Sigma0,
};
use clap::CommandFactory;

use crate::args::{Cli, CommonArgs, MultivariateArgs, SimulateArgs, UnivariateArgs};
use crate::config::Config;
use crate::error::user;
use crate::manifest::Manifest;

const DEFAULT_BINS: usize = 50;
const DEFAULT_OUT: &str = "out";

fn missing_flag(subcommand: &str, flag: &str) -> anyhow::Error {
    let mut cmd = Cli::command();
    cmd.build();
    let usage = cmd
        .find_subcommand_mut(subcommand)
        .map(|c| c.render_usage().to_string())
        .unwrap_or_default();
    user(format!("missing required --{flag}\n\n{usage}"))
}

struct Common {
    data: PathBuf,
    design: PathBuf,
    group_a: String,
    group_b: String,
    r: usize,
    seed: u64,
    level: f64,
    tau: f64,
    mu0: String,
    lambda0: f64,
    alpha0: f64,
    beta0: f64,
    data_imputed: bool,
    emit_draws: bool,
    emit_hist: bool,
    bins: usize,
    out: PathBuf,
}

impl Common {
    fn resolve(args: &CommonArgs, cfg: &Config, subcommand: &str) -> anyhow::Result<Self> {
        let required = |flag: Option<PathBuf>, key: &str| -> anyhow::Result<PathBuf> {
            cfg.pick_opt(flag, key)?.ok_or_else(|| missing_flag(subcommand, key))
        };
        let data = required(args.data.clone(), "data")?;
        let design = required(args.design.clone(), "design")?;
        let group_a: String = cfg
            .pick_opt(args.group_a.clone(), "group-a")?
            .ok_or_else(|| missing_flag(subcommand, "group-a"))?;
        let group_b: String = cfg
            .pick_opt(args.group_b.clone(), "group-b")?
            .ok_or_else(|| missing_flag(subcommand, "group-b"))?;
        let c = Self {
            data,
            design,
            group_a,
            group_b,
            r: cfg.pick(args.r, "r", DEFAULT_R)?,
            seed: cfg.pick(args.seed, "seed", 0)?,
            level: cfg.pick(args.level, "level", DEFAULT_LEVEL)?,
            tau: cfg.pick(args.tau, "tau", 0.0)?,
            mu0: cfg.pick_text(args.mu0.clone(), "mu0", "pooled")?,
            lambda0: cfg.pick(args.lambda0, "lambda0", 1.0)?,
            alpha0: cfg.pick(args.alpha0, "alpha0", 1.0)?,
            beta0: cfg.pick(args.beta0, "beta0", 1.0)?,
            data_imputed: cfg.pick(args.data_imputed, "data-imputed", false)?,
            emit_draws: cfg.pick(args.emit_draws, "emit-draws", false)?,
            emit_hist: cfg.pick(args.emit_hist, "emit-hist", false)?,
            bins: cfg.pick(args.bins, "bins", DEFAULT_BINS)?,
            out: cfg.pick(args.out.clone(), "out", PathBuf::from(DEFAULT_OUT))?,
        };
        if c.group_a == c.group_b {
            return Err(user("--group-a and --group-b must differ"));
        }
        check_level(c.level)?;
        if !(c.tau.is_finite() && c.tau >= 0.0) {
            return Err(user(format!("--tau must be >= 0, got {}", c.tau)));
        }
        if c.r == 0 {
            return Err(user("--r must be >= 1"));
        }
        if c.bins < 2 {
            return Err(user("--bins must be >= 2"));
        }
        Ok(c)
    }

    fn mu0(&self) -> anyhow::Result<Mu0> {
        parse_mu0(&self.mu0)
    }

    fn record(&self, m: &mut Manifest) -> anyhow::Result<()> {
        m.param("data", &self.data);
        m.param("design", &self.design);
        m.param("group-a", &self.group_a);
        m.param("group-b", &self.group_b);
        m.param("r", self.r);
        m.param("seed", self.seed);
        m.param("level", self.level);
        m.param("tau", self.tau);
        m.param("mu0", &self.mu0);
        m.param("lambda0", self.lambda0);
        m.param("alpha0", self.alpha0);
        m.param("beta0", self.beta0);
        m.param("data-imputed", self.data_imputed);
        m.param("emit-draws", self.emit_draws);
        m.param("emit-hist", self.emit_hist);
        m.param("bins", self.bins);
        m.input("data", &self.data)?;
        m.input("design", &self.design)
    }

    /// The two compared groups, flagged when the matrix was imputed upstream.
    fn groups(&self) -> anyhow::Result<(GroupData, GroupData)> {
        let mut groups = dataio::load_dataset(&self.data, &self.design)?;
        let available = groups.keys().cloned().collect::<Vec<_>>().join(", ");
        let mut take = |label: &str| {
            groups
                .remove(label)
                .map(|g| g.with_pre_imputed(self.data_imputed))
                .ok_or_else(|| user(format!("unknown condition '{label}' (available: {available})")))
        };
        let a = take(&self.group_a)?;
        let b = take(&self.group_b)?;
        Ok((a, b))
    }
}

fn check_level(level: f64) -> anyhow::Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(user(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn parse_mu0(text: &str) -> anyhow::Result<Mu0> {
    if text.eq_ignore_ascii_case("pooled") {
        return Ok(Mu0::Pooled);
    }
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Mu0::Fixed)
        .ok_or_else(|| user(format!("--mu0 must be 'pooled' or a finite number, got '{text}'")))
}

fn parse_combine(text: &str) -> anyhow::Result<Combine> {
    text.parse::<Combine>().map_err(user)
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_posterior(
    c: &Common,
    samples: &DifferenceSamples,
    manifest: &mut Manifest,
) -> anyhow::Result<()> {
    create_out(&c.out)?;
    let summary = summarize(samples, c.level, c.tau);
    dataio::write_summary(&summary, &c.out.join("summary.csv"))?;
    manifest.outputs.push("summary.csv".into());
    if c.emit_draws {
        dataio::write_samples(samples, &c.out.join("draws.csv"))?;
        manifest.outputs.push("draws.csv".into());
    }
    if c.emit_hist {
        dataio::write_histogram(samples, c.bins, c.level, &c.out.join("histogram.csv"))?;
        manifest.outputs.push("histogram.csv".into());
    }
    manifest.provenance = Some(serde_json::to_value(&samples.provenance)?);
    manifest.outputs.push("manifest.json".into());
    manifest.write(&c.out)?;
    log::info!(
        "{} peptides, {} flagged; average P(difference < 0) = {:.4}",
        summary.peptides.len(),
        summary.peptides.iter().filter(|p| p.flagged).count(),
        summary.average_prob_negative
    );
    Ok(())
}

pub fn univariate(args: &UnivariateArgs) -> anyhow::Result<()> {
    let cfg = Config::load(args.common.config.as_deref(), "univariate")?;
    let c = Common::resolve(&args.common, &cfg, "univariate")?;
    let prior = PriorConfig {
        mu0: c.mu0()?,
        lambda0: c.lambda0,
        alpha0: c.alpha0,
        beta0: c.beta0,
        ..PriorConfig::default()
    };
    prior.validate()?;
    let mut manifest = Manifest::new("univariate");
    c.record(&mut manifest)?;
    let (a, b) = c.groups()?;
    let samples = univariate_difference(&a, &b, &prior, c.r, &RngStream::from_seed(c.seed))?;
    write_posterior(&c, &samples, &mut manifest)
}

fn parse_sigma0(text: &str, manifest: &mut Manifest) -> anyhow::Result<Sigma0> {
    if text.eq_ignore_ascii_case("identity") {
        return Ok(Sigma0::identity());
    }
    if let Ok(c) = text.trim().parse::<f64>() {
        if c.is_finite() && c > 0.0 {
            return Ok(Sigma0::ScaledIdentity(c));
        }
        return Err(user(format!("--sigma0 scale must be > 0, got {c}")));
    }
    let path = Path::new(text);
    if !path.exists() {
        return Err(user(format!(
            "--sigma0 must be 'identity', a positive number or an existing CSV file, got '{text}'"
        )));
    }
    let (peptide_ids, matrix) = dataio::load_labelled_matrix(path)?;
    manifest.input("sigma0", path)?;
    Ok(Sigma0::Full {
        peptide_ids,
        matrix,
    })
}

pub fn multivariate(args: &MultivariateArgs) -> anyhow::Result<()> {
    let cfg = Config::load(args.common.config.as_deref(), "multivariate")?;
    let c = Common::resolve(&args.common, &cfg, "multivariate")?;
    let mut manifest = Manifest::new("multivariate");
    c.record(&mut manifest)?;

    let imputed: Vec<PathBuf> = if args.imputed.is_empty() {
        cfg.get("imputed")?.unwrap_or_default()
    } else {
        args.imputed.clone()
    };
    let d_flag = cfg.pick_opt(args.d, "d")?;
    let d = match (d_flag, imputed.len()) {
        (Some(d), n) if n > 0 && d != n => {
            return Err(user(format!("--d {d} conflicts with {n} --imputed files")))
        }
        (_, n) if n > 0 => n,
        (d, _) => d.unwrap_or(bayesdiff::imputation::DEFAULT_DRAWS),
    };
    if d == 0 {
        return Err(user("--d must be >= 1"));
    }
    let nu0 = cfg.pick(args.nu0, "nu0", 10.0)?;
    let sigma0_text = cfg.pick_text(args.sigma0.clone(), "sigma0", "identity")?;
    let combine_text = cfg.pick_text(args.combine.clone(), "combine", "average")?;
    let combine = parse_combine(&combine_text)?;
    let sigma0 = parse_sigma0(&sigma0_text, &mut manifest)?;
    let prior = PriorConfig {
        mu0: c.mu0()?,
        lambda0: c.lambda0,
        alpha0: c.alpha0,
        beta0: c.beta0,
        sigma0,
        nu0,
    };
    prior.validate()?;

    let (a, b) = c.groups()?;
    let by_protein = cfg
        .pick_opt(args.by_protein, "by-protein")?
        .unwrap_or(a.proteins.is_some());
    if by_protein && a.proteins.is_none() {
        return Err(user("--by-protein needs a protein column in --data"));
    }

    let imputer = if imputed.is_empty() {
        Imputer::Predictive
    } else {
        for (k, p) in imputed.iter().enumerate() {
            manifest.input(&format!("imputed-{k}"), p)?;
        }
        let mut sets = dataio::load_imputed(&c.data, &c.design, &imputed)?;
        Imputer::Provided {
            a: sets.remove(&c.group_a).expect("condition checked above"),
            b: sets.remove(&c.group_b).expect("condition checked above"),
        }
    };

    manifest.param("d", d);
    manifest.param("nu0", nu0);
    manifest.param("sigma0", &sigma0_text);
    manifest.param("by-protein", by_protein);
    manifest.param("combine", combine);
    manifest.param("imputed", &imputed);

    let opts = MultivariateOptions {
        d_count: d,
        r: c.r,
        combine,
    };
    let rng = RngStream::from_seed(c.seed);
    let samples = if by_protein {
        multivariate_by_protein_with(&a, &b, &prior, &opts, &imputer, &rng)?
    } else {
        multivariate_difference_with(&a, &b, &prior, &opts, &imputer, &rng)?
    };
    write_posterior(&c, &samples, &mut manifest)
}

fn sim_config(label: &str, manifest: &mut Manifest) -> anyhow::Result<SimConfig> {
    if let Some(c) = SimConfig::builtin(label) {
        return Ok(c);
    }
    let path = Path::new(label);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {label}"))?;
        let config: SimConfig = serde_json::from_str(&text)
            .map_err(|e| user(format!("{label}: invalid design: {e}")))?;
        manifest.input("design-table", path)?;
        return Ok(config);
    }
    Err(user(format!(
        "unknown design '{label}'; available: {} (or a JSON design file)",
        SimConfig::builtin_labels().join(", ")
    )))
}

fn parse_engines(text: &str) -> anyhow::Result<Vec<Engine>> {
    text.split(',')
        .map(|e| match e.trim().to_ascii_lowercase().as_str() {
            "univariate" => Ok(Engine::Univariate),
            "multivariate" => Ok(Engine::Multivariate),
            other => Err(user(format!("unknown engine '{other}'"))),
        })
        .collect()
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Univariate => "univariate",
        Engine::Multivariate => "multivariate",
    }
}

fn write_benchmark_csv(rows: &[BenchmarkRow], path: &Path) -> anyhow::Result<()> {
    let mut text = String::from(
        "design,engine,replications,mean_difference,mean_difference_sd,ci_width,ci_width_sd,\
         p_value,p_value_sd,rmse,rmse_sd,cic95,cic95_sd\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            r.design,
            engine_name(r.engine),
            r.replications,
            r.mean_difference.mean,
            r.mean_difference.sd,
            r.ci_width.mean,
            r.ci_width.sd,
            r.p_value.mean,
            r.p_value.sd,
            r.rmse.mean,
            r.rmse.sd,
            r.cic95.mean,
            r.cic95.sd
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_timing(rows: &[TimingRow], dir: &Path) -> anyhow::Result<()> {
    let mut text = String::from("peptides,method,seconds\n");
    for r in rows {
        let method = match r.method {
            TimedMethod::Univariate => "univariate",
            TimedMethod::Multivariate => "multivariate",
            TimedMethod::TTest => "t-test",
        };
        text.push_str(&format!("{},{method},{:.6}\n", r.peptides, r.seconds));
    }
    std::fs::write(dir.join("timing.csv"), text).context("writing timing.csv")?;
    let json = serde_json::to_string_pretty(rows)? + "\n";
    std::fs::write(dir.join("timing.json"), json).context("writing timing.json")
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = Config::load(args.config.as_deref(), "simulate")?;
    let mut manifest = Manifest::new("simulate");
    let label: String = cfg
        .pick_opt(args.design_table.clone(), "design-table")?
        .ok_or_else(|| {
            user(format!(
                "missing required --design-table; available: {}",
                SimConfig::builtin_labels().join(", ")
            ))
        })?;
    let mut design = sim_config(&label, &mut manifest)?;
    design.replications = cfg.pick(args.reps, "reps", design.replications)?;
    design.seed = cfg.pick(args.seed, "seed", design.seed)?;
    design.validate()?;

    let r = cfg.pick(args.r, "r", DEFAULT_R)?;
    let d = cfg.pick(args.d, "d", bayesdiff::imputation::DEFAULT_DRAWS)?;
    let level = cfg.pick(args.level, "level", DEFAULT_LEVEL)?;
    check_level(level)?;
    if r == 0 || d == 0 {
        return Err(user("--r and --d must be >= 1"));
    }
    let combine_text = cfg.pick_text(args.combine.clone(), "combine", "average")?;
    let combine = parse_combine(&combine_text)?;
    let t_text = cfg.pick_text(args.t_test.clone(), "t-test", "welch")?;
    let t_test = match t_text.to_ascii_lowercase().as_str() {
        "welch" => TTestKind::Welch,
        "pooled" => TTestKind::Pooled,
        other => return Err(user(format!("--t-test must be welch or pooled, got '{other}'"))),
    };
    let engines = match cfg.pick_opt(args.engines.clone(), "engines")? {
        Some(text) => parse_engines(&text)?,
        None => design.default_engines(),
    };
    let timing = cfg.pick(args.timing, "timing", false)?;
    let counts = cfg.pick(args.timing_counts.clone(), "timing-counts", vec![100, 1000, 10_000])?;
    let out = cfg.pick(args.out.clone(), "out", PathBuf::from(DEFAULT_OUT))?;

    manifest.param("design-table", &label);
    manifest.param("reps", design.replications);
    manifest.param("seed", design.seed);
    manifest.param("r", r);
    manifest.param("d", d);
    manifest.param("level", level);
    manifest.param("combine", combine);
    manifest.param("t-test", t_test);
    manifest.param(
        "engines",
        engines.iter().map(|e| engine_name(*e)).collect::<Vec<_>>().join(","),
    );
    manifest.param("timing", timing);
    manifest.param("timing-counts", &counts);
    let mut resolved = BTreeMap::new();
    resolved.insert("design", serde_json::to_value(&design)?);
    manifest.provenance = Some(serde_json::to_value(resolved)?);

    let opts = BenchOptions {
        prior: PriorConfig::default(),
        r,
        d_count: d,
        combine,
        level,
        t_test,
    };
    let rows = engines
        .iter()
        .map(|&e| run_benchmark(&design, e, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    create_out(&out)?;
    write_benchmark_csv(&rows, &out.join("benchmark.csv"))?;
    std::fs::write(out.join("benchmark.json"), serde_json::to_string_pretty(&rows)? + "\n")
        .context("writing benchmark.json")?;
    manifest.outputs.extend(["benchmark.csv".into(), "benchmark.json".into()]);

    if timing {
        let topts = TimingOptions {
            bench: opts,
            seed: design.seed,
            ..TimingOptions::default()
        };
        let methods = [TimedMethod::Univariate, TimedMethod::Multivariate, TimedMethod::TTest];
        let rows = run_timing(&counts, &methods, &topts)?;
        write_timing(&rows, &out)?;
        manifest.outputs.extend(["timing.csv".into(), "timing.json".into()]);
    }
    manifest.outputs.push("manifest.json".into());
    manifest.write(&out)
}
