//! Differential analysis engines.
//!
//! The univariate engine treats peptides independently; with a diagonal
//! covariance the posterior of each mean depends on observed values only, so
//! missing cells are simply ignored and no imputation takes place.
//!
//! The multivariate engine models the covariance within a block of peptides.
//! Missing cells are multiply imputed, each completed dataset gives a
//! Normal-Inverse-Wishart posterior, and the per-imputation Student-t draws
//! are combined realisation by realisation.
//!
//! Random streams are keyed by labels rather than positions: univariate draws
//! by peptide id and group side, multivariate draws by the block's peptide
//! ids, group side and imputation index. Results therefore do not depend on
//! thread scheduling, peptide order, or on which other blocks are analysed.

use indexmap::IndexMap;
use rand::Rng;
use rayon::prelude::*;

use crate::conjugate::{niw_marginal_mean, niw_update, nig_marginal_mean, nig_update};
use crate::error::{Error, Result};
use crate::group::GroupData;
use crate::imputation::{impute, ImputedSet, DEFAULT_MISSINGNESS_WARNING};
use crate::prior::PriorConfig;
use crate::rng::{label_hash, RngStream};
use crate::samples::{
    BlockReport, Combine, DifferenceSamples, Engine, Provenance, SkippedPeptide,
};
use crate::student_t::{MultivariateTSampler, ScaledTDist};

pub const DEFAULT_R: usize = 10_000;
pub const DEFAULT_LEVEL: f64 = 0.95;

pub(crate) const SIDE_A: u64 = 0;
pub(crate) const SIDE_B: u64 = 1;
const TAG_IMPUTE: u64 = 0x696d_7075_7465;
const TAG_SAMPLE: u64 = 0x7361_6d70_6c65;
const TAG_MIXTURE: u64 = 0x6d69_7874_7572;

/// Marginal posterior of one peptide's mean in one group, from its observed
/// values only.
///
/// With [`Mu0::Pooled`](crate::prior::Mu0::Pooled) the prior mean pools the
/// observed values of this group alone; the difference engines pool over
/// both compared groups.
pub fn univariate_posterior(
    group: &GroupData,
    peptide: &str,
    prior: &PriorConfig,
) -> Result<ScaledTDist> {
    prior.validate()?;
    if group.pre_imputed {
        return Err(Error::ImputedInput);
    }
    let p = group
        .peptide_index(peptide)
        .ok_or_else(|| Error::UnknownPeptide(peptide.to_string()))?;
    let mu0 = prior.mu0_for(peptide, &[group])?;
    posterior_from_observed(group, p, prior, mu0)
}

fn posterior_from_observed(
    group: &GroupData,
    p: usize,
    prior: &PriorConfig,
    mu0: f64,
) -> Result<ScaledTDist> {
    let observed = group.matrix.observed_column(p);
    if observed.is_empty() {
        return Err(Error::NoData {
            peptide: group.peptide_ids[p].clone(),
            group: group.label.clone(),
        });
    }
    nig_marginal_mean(&nig_update(&prior.nig(mu0)?, &observed)?)
}

/// Reorders `b`'s columns to match `a`'s peptide order.
fn align(a: &GroupData, b: &GroupData) -> Result<GroupData> {
    if a.peptide_ids == b.peptide_ids {
        return Ok(b.clone());
    }
    if a.peptide_ids.len() != b.peptide_ids.len() {
        return Err(Error::PeptideMismatch(format!(
            "'{}' has {} peptides, '{}' has {}",
            a.label,
            a.peptide_ids.len(),
            b.label,
            b.peptide_ids.len()
        )));
    }
    let cols = a
        .peptide_ids
        .iter()
        .map(|id| {
            b.peptide_index(id).ok_or_else(|| {
                Error::PeptideMismatch(format!("'{id}' is absent from group '{}'", b.label))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(b.select(&cols))
}

fn check_draws(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidInput("the number of posterior draws R must be >= 1".into()));
    }
    Ok(())
}

fn no_observation_reason(a: &GroupData, b: &GroupData, p: usize) -> Option<String> {
    let missing: Vec<&str> = [a, b]
        .iter()
        .filter(|g| g.matrix.observed_column(p).is_empty())
        .map(|g| g.label.as_str())
        .collect();
    (!missing.is_empty()).then(|| format!("no observed value in group(s) {}", missing.join(", ")))
}

/// Posterior draws of `mu_a - mu_b` for every peptide, peptides analysed
/// independently.
///
/// Peptides lacking observations in either group are skipped and listed in
/// the provenance.
pub fn univariate_difference(
    a: &GroupData,
    b: &GroupData,
    prior: &PriorConfig,
    r: usize,
    rng: &RngStream,
) -> Result<DifferenceSamples> {
    prior.validate()?;
    check_draws(r)?;
    if a.pre_imputed || b.pre_imputed {
        return Err(Error::ImputedInput);
    }
    let b = align(a, b)?;

    let mut values = vec![0.0; a.n_peptides() * r];
    let kept: Vec<Result<bool>> = values
        .par_chunks_mut(r)
        .enumerate()
        .map(|(p, out)| {
            if no_observation_reason(a, &b, p).is_some() {
                return Ok(false);
            }
            let id = &a.peptide_ids[p];
            let mu0 = prior.mu0_for(id, &[a, &b])?;
            let post_a = posterior_from_observed(a, p, prior, mu0)?.sampler();
            let post_b = posterior_from_observed(&b, p, prior, mu0)?.sampler();
            let key = label_hash(id);
            let mut gen_a = rng.derive(&[key, SIDE_A]).rng();
            let mut gen_b = rng.derive(&[key, SIDE_B]).rng();
            for v in out.iter_mut() {
                *v = post_a.draw(&mut gen_a) - post_b.draw(&mut gen_b);
            }
            Ok(true)
        })
        .collect();

    let mut ids = Vec::new();
    let mut skipped = Vec::new();
    let mut write = 0;
    for (p, res) in kept.into_iter().enumerate() {
        if res? {
            ids.push(a.peptide_ids[p].clone());
            if write != p {
                values.copy_within(p * r..(p + 1) * r, write * r);
            }
            write += 1;
        } else {
            skipped.push(SkippedPeptide {
                peptide: a.peptide_ids[p].clone(),
                reason: no_observation_reason(a, &b, p).unwrap_or_default(),
            });
        }
    }
    values.truncate(write * r);
    DifferenceSamples::new(
        ids,
        (a.label.clone(), b.label.clone()),
        r,
        values,
        Provenance {
            engine: Engine::Univariate,
            seed: rng.seed,
            stream: rng.stream,
            draws: r,
            imputations: None,
            combine: None,
            skipped,
            blocks: Vec::new(),
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultivariateOptions {
    /// Imputation draws `D`.
    pub d_count: usize,
    /// Posterior draws `R`.
    pub r: usize,
    pub combine: Combine,
}

impl Default for MultivariateOptions {
    fn default() -> Self {
        Self {
            d_count: crate::imputation::DEFAULT_DRAWS,
            r: DEFAULT_R,
            combine: Combine::Average,
        }
    }
}

/// Source of completed datasets for the multivariate engine.
#[derive(Clone, Debug, Default)]
pub enum Imputer {
    /// Per-peptide posterior-predictive draws (see [`impute`]).
    #[default]
    Predictive,
    /// Externally produced completions, column-aligned with the two groups.
    Provided { a: ImputedSet, b: ImputedSet },
}

/// Draws of one block; `values` is peptide-major (`ids.len() * r`).
struct BlockDraws {
    ids: Vec<String>,
    values: Vec<f64>,
    skipped: Vec<SkippedPeptide>,
}

/// Stream of the posterior draws of one block side and imputation.
pub(crate) fn block_stream(rng: &RngStream, ids: &[String], side: u64, d: u64) -> RngStream {
    rng.derive(&[block_key(ids), TAG_SAMPLE, side, d])
}

fn block_key(ids: &[String]) -> u64 {
    label_hash(&ids.join("\u{1f}"))
}

/// Runs the multivariate engine on the peptides `cols` of the aligned groups.
fn run_block(
    a: &GroupData,
    b: &GroupData,
    cols: &[usize],
    imputer: &Imputer,
    prior: &PriorConfig,
    opts: &MultivariateOptions,
    rng: &RngStream,
) -> Result<BlockDraws> {
    let mut kept = Vec::with_capacity(cols.len());
    let mut skipped = Vec::new();
    for &p in cols {
        match no_observation_reason(a, b, p) {
            Some(reason) => skipped.push(SkippedPeptide {
                peptide: a.peptide_ids[p].clone(),
                reason,
            }),
            None => kept.push(p),
        }
    }
    if kept.is_empty() {
        return Ok(BlockDraws {
            ids: Vec::new(),
            values: Vec::new(),
            skipped,
        });
    }
    let ga = a.select(&kept);
    let gb = b.select(&kept);
    let ids = ga.peptide_ids.clone();
    let mu0 = ids
        .iter()
        .map(|id| prior.mu0_for(id, &[&ga, &gb]))
        .collect::<Result<Vec<_>>>()?;
    let niw_prior = prior.niw(&mu0, &ids)?;

    let (set_a, set_b) = match imputer {
        Imputer::Predictive => {
            let nig: Vec<_> = mu0.iter().map(|m| prior.nig(*m)).collect::<Result<_>>()?;
            (
                impute(&ga, &nig, opts.d_count, &rng.derive(&[TAG_IMPUTE, SIDE_A]))?,
                impute(&gb, &nig, opts.d_count, &rng.derive(&[TAG_IMPUTE, SIDE_B]))?,
            )
        }
        Imputer::Provided { a: sa, b: sb } => (sa.select_columns(&kept), sb.select_columns(&kept)),
    };

    let mut samplers = [Vec::new(), Vec::new()];
    for (side, set) in [(SIDE_A, &set_a), (SIDE_B, &set_b)] {
        for completed in set.draws() {
            let post = niw_update(&niw_prior, completed)?;
            samplers[side as usize].push(niw_marginal_mean(&post)?.sampler()?);
        }
    }
    let draws_a = combine_draws(&samplers[0], &ids, SIDE_A, opts, rng);
    let draws_b = combine_draws(&samplers[1], &ids, SIDE_B, opts, rng);

    let dim = ids.len();
    let r = opts.r;
    let mut values = vec![0.0; dim * r];
    for i in 0..r {
        for q in 0..dim {
            values[q * r + i] = draws_a[i * dim + q] - draws_b[i * dim + q];
        }
    }
    Ok(BlockDraws {
        ids,
        values,
        skipped,
    })
}

/// `R` combined draws of one side, row-major `R x P`.
fn combine_draws(
    samplers: &[MultivariateTSampler],
    ids: &[String],
    side: u64,
    opts: &MultivariateOptions,
    rng: &RngStream,
) -> Vec<f64> {
    let dim = ids.len();
    let mut out = vec![0.0; opts.r * dim];
    let mut z = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    match opts.combine {
        Combine::Average => {
            for (d, sampler) in samplers.iter().enumerate() {
                let mut gen = block_stream(rng, ids, side, d as u64).rng();
                for chunk in out.chunks_exact_mut(dim) {
                    sampler.draw_into(&mut gen, &mut z, &mut row);
                    for (o, v) in chunk.iter_mut().zip(&row) {
                        *o += v;
                    }
                }
            }
            let d = samplers.len() as f64;
            for o in &mut out {
                *o /= d;
            }
        }
        Combine::Mixture => {
            let mut gen = block_stream(rng, ids, side, TAG_MIXTURE).rng();
            for chunk in out.chunks_exact_mut(dim) {
                let d = gen.random_range(0..samplers.len());
                samplers[d].draw_into(&mut gen, &mut z, chunk);
            }
        }
    }
    out
}

fn check_multivariate(
    a: &GroupData,
    b: &GroupData,
    prior: &PriorConfig,
    opts: &MultivariateOptions,
) -> Result<()> {
    prior.validate()?;
    check_draws(opts.r)?;
    if opts.d_count == 0 {
        return Err(Error::InvalidInput("the number of imputation draws D must be >= 1".into()));
    }
    for g in [a, b] {
        let ratio = g.matrix.missingness_ratio();
        if ratio > DEFAULT_MISSINGNESS_WARNING {
            log::warn!(
                "group '{}' is {:.0}% missing; imputed posteriors may understate uncertainty",
                g.label,
                100.0 * ratio
            );
        }
    }
    Ok(())
}

fn check_provided(imputer: &Imputer, a: &GroupData, b: &GroupData) -> Result<()> {
    if let Imputer::Provided { a: sa, b: sb } = imputer {
        for (set, g) in [(sa, a), (sb, b)] {
            if set.observed().ncols() != g.n_peptides() || set.observed().nrows() != g.n_samples()
            {
                return Err(Error::InvalidInput(format!(
                    "imputed matrices for group '{}' do not match its shape",
                    g.label
                )));
            }
        }
    }
    Ok(())
}

fn multivariate_provenance(rng: &RngStream, opts: &MultivariateOptions, d: usize) -> Provenance {
    Provenance {
        engine: Engine::Multivariate,
        seed: rng.seed,
        stream: rng.stream,
        draws: opts.r,
        imputations: Some(d),
        combine: Some(opts.combine),
        skipped: Vec::new(),
        blocks: Vec::new(),
    }
}

fn imputation_count(imputer: &Imputer, opts: &MultivariateOptions) -> usize {
    match imputer {
        Imputer::Predictive => opts.d_count,
        Imputer::Provided { a, .. } => a.d_count(),
    }
}

/// Posterior draws of the vector `mu_a - mu_b`, all peptides in one block.
pub fn multivariate_difference(
    a: &GroupData,
    b: &GroupData,
    prior: &PriorConfig,
    opts: &MultivariateOptions,
    rng: &RngStream,
) -> Result<DifferenceSamples> {
    multivariate_difference_with(a, b, prior, opts, &Imputer::Predictive, rng)
}

pub fn multivariate_difference_with(
    a: &GroupData,
    b: &GroupData,
    prior: &PriorConfig,
    opts: &MultivariateOptions,
    imputer: &Imputer,
    rng: &RngStream,
) -> Result<DifferenceSamples> {
    check_multivariate(a, b, prior, opts)?;
    let b = align(a, b)?;
    check_provided(imputer, a, &b)?;
    let cols: Vec<usize> = (0..a.n_peptides()).collect();
    let block = run_block(a, &b, &cols, imputer, prior, opts, rng)?;
    let mut prov = multivariate_provenance(rng, opts, imputation_count(imputer, opts));
    prov.skipped = block.skipped;
    DifferenceSamples::new(
        block.ids,
        (a.label.clone(), b.label.clone()),
        opts.r,
        block.values,
        prov,
    )
}

/// Multivariate engine run independently on each protein's peptides
/// (block-diagonal covariance). A failing block is reported in the
/// provenance and leaves the other blocks intact; if every block fails the
/// first block's error is returned.
pub fn multivariate_by_protein(
    a: &GroupData,
    b: &GroupData,
    prior: &PriorConfig,
    opts: &MultivariateOptions,
    rng: &RngStream,
) -> Result<DifferenceSamples> {
    multivariate_by_protein_with(a, b, prior, opts, &Imputer::Predictive, rng)
}

pub fn multivariate_by_protein_with(
    a: &GroupData,
    b: &GroupData,
    prior: &PriorConfig,
    opts: &MultivariateOptions,
    imputer: &Imputer,
    rng: &RngStream,
) -> Result<DifferenceSamples> {
    check_multivariate(a, b, prior, opts)?;
    let b = align(a, b)?;
    check_provided(imputer, a, &b)?;
    let blocks = protein_blocks(a)?;

    let results: Vec<(String, usize, Result<BlockDraws>)> = blocks
        .into_par_iter()
        .map(|(protein, cols)| {
            let res = run_block(a, &b, &cols, imputer, prior, opts, rng);
            (protein, cols.len(), res)
        })
        .collect();

    let mut prov = multivariate_provenance(rng, opts, imputation_count(imputer, opts));
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut first_error = None;
    for (protein, count, res) in results {
        match res {
            Ok(block) => {
                ids.extend(block.ids);
                values.extend(block.values);
                prov.skipped.extend(block.skipped);
                prov.blocks.push(BlockReport {
                    protein,
                    peptides: count,
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("protein '{protein}' failed: {e}");
                prov.blocks.push(BlockReport {
                    protein,
                    peptides: count,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if let (true, Some(e)) = (prov.blocks.iter().all(|b| b.error.is_some()), first_error) {
        return Err(e);
    }
    DifferenceSamples::new(ids, (a.label.clone(), b.label.clone()), opts.r, values, prov)
}

/// Peptide columns grouped by protein, proteins in order of first appearance.
pub fn protein_blocks(group: &GroupData) -> Result<Vec<(String, Vec<usize>)>> {
    let proteins = group.proteins.as_ref().ok_or_else(|| {
        Error::MissingProtein(group.peptide_ids.first().cloned().unwrap_or_default())
    })?;
    let mut blocks: IndexMap<&str, Vec<usize>> = IndexMap::new();
    for (p, protein) in proteins.iter().enumerate() {
        if protein.trim().is_empty() {
            return Err(Error::MissingProtein(group.peptide_ids[p].clone()));
        }
        blocks.entry(protein.as_str()).or_default().push(p);
    }
    Ok(blocks
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect())
}
