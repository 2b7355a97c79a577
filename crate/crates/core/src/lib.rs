//! Bayesian differential analysis of grouped intensity data.
//!
//! Closed-form Normal-Inverse-Gamma / Normal-Inverse-Wishart posteriors,
//! Student-t sampling of posterior mean differences, multiple imputation for
//! the multivariate engine, simulation benchmarks and CSV I/O.

pub mod conjugate;
pub mod dataio;
pub mod error;
pub mod group;
pub mod imputation;
pub mod inference;
pub mod prior;
pub mod rng;
pub mod samples;
pub mod simulation;
pub mod stats;
pub mod student_t;
pub mod summary;

#[cfg(test)]
mod testutil;

pub use conjugate::{
    nig_marginal_mean, nig_predictive, nig_update, niw_marginal_mean, niw_update, scatter_about,
    NigParams, NiwParams,
};
pub use error::{Error, ParseErrorKind, Result};
pub use group::{GroupData, MaskedMatrix};
pub use imputation::{impute, ImputedSet};
pub use inference::{
    multivariate_by_protein, multivariate_by_protein_with, multivariate_difference,
    multivariate_difference_with, protein_blocks, univariate_difference, univariate_posterior,
    Imputer, MultivariateOptions,
};
pub use prior::{Mu0, PriorConfig, Sigma0};
pub use rng::RngStream;
pub use samples::{BlockReport, Combine, DifferenceSamples, Engine, Provenance, SkippedPeptide};
pub use student_t::{
    sample_multivariate_t, sample_scaled_t, MultivariateTDist, ScaledTDist,
};
pub use summary::{summarize, PeptideSummary, PosteriorSummary};

pub use nalgebra::{DMatrix, DVector};
