use serde::{Deserialize, Serialize};

use crate::samples::DifferenceSamples;

/// Below this many draws the empirical quantiles are unstable.
pub const MIN_STABLE_DRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeptideSummary {
    pub peptide: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub prob_positive: f64,
    pub prob_negative: f64,
    /// `P(|difference| > tau)`.
    pub prob_exceeds_tau: f64,
    /// The credible interval excludes 0.
    pub flagged: bool,
}

impl PeptideSummary {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub tau: f64,
    pub peptides: Vec<PeptideSummary>,
    /// Mean over peptides of `P(difference < 0)`.
    pub average_prob_negative: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of one vector of draws.
pub fn summarize_draws(peptide: &str, draws: &[f64], level: f64, tau: f64) -> PeptideSummary {
    let n = draws.len() as f64;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    let lo = quantile_sorted(&sorted, tail);
    let hi = quantile_sorted(&sorted, 1.0 - tail);
    let mean = crate::stats::mean(draws);
    let positive = draws.iter().filter(|d| **d > 0.0).count() as f64;
    let negative = draws.iter().filter(|d| **d < 0.0).count() as f64;
    let beyond = draws.iter().filter(|d| d.abs() > tau).count() as f64;
    PeptideSummary {
        peptide: peptide.to_string(),
        mean,
        lo,
        hi,
        prob_positive: positive / n,
        prob_negative: negative / n,
        prob_exceeds_tau: beyond / n,
        flagged: lo > 0.0 || hi < 0.0,
    }
}

/// Per-peptide posterior summaries of `samples`.
pub fn summarize(samples: &DifferenceSamples, level: f64, tau: f64) -> PosteriorSummary {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    assert!(tau >= 0.0, "tau must be >= 0");
    if samples.n_draws() < MIN_STABLE_DRAWS {
        log::warn!(
            "only {} posterior draws; credible intervals may be unstable (use >= {MIN_STABLE_DRAWS})",
            samples.n_draws()
        );
    }
    let peptides: Vec<PeptideSummary> = if samples.n_draws() == 0 {
        Vec::new()
    } else {
        use rayon::prelude::*;
        (0..samples.n_peptides())
            .into_par_iter()
            .map(|q| summarize_draws(&samples.peptide_ids[q], samples.peptide(q), level, tau))
            .collect()
    };
    let average_prob_negative = if peptides.is_empty() {
        f64::NAN
    } else {
        peptides.iter().map(|p| p.prob_negative).sum::<f64>() / peptides.len() as f64
    };
    PosteriorSummary {
        level,
        tau,
        peptides,
        average_prob_negative,
    }
}
