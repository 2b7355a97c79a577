use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error(
        "insufficient degrees of freedom: nu - P + 1 = {df} (nu = {nu}, P = {dim}); \
         raise nu0 or reduce the block size"
    )]
    InsufficientDegreesOfFreedom { df: f64, nu: f64, dim: usize },

    #[error("scale matrix is not positive-definite after symmetrization and jitter")]
    NotPositiveDefinite,

    #[error("peptide '{peptide}' has no observed value in group '{group}' and cannot be imputed")]
    Unimputable { peptide: String, group: String },

    #[error("peptide '{peptide}' has no observed value in group '{group}'")]
    NoData { peptide: String, group: String },

    #[error(
        "refusing imputed input for the univariate engine: imputed values add no information and \
         artificially shrink posterior uncertainty; supply the raw matrix with missing values instead"
    )]
    ImputedInput,

    #[error("unknown peptide '{0}'")]
    UnknownPeptide(String),

    #[error("groups do not cover the same peptides: {0}")]
    PeptideMismatch(String),

    #[error("missing protein label for peptide '{0}'")]
    MissingProtein(String),

    #[error("{path}:{line}:{column}: {kind}: {message}")]
    Parse {
        kind: ParseErrorKind,
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Category of a malformed input file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyFile,
    BadHeader,
    DuplicatePeptide,
    DuplicateSample,
    UnknownSample,
    MissingSample,
    NonRectangular,
    InvalidNumber,
    UnexpectedMissing,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::EmptyFile => "empty file",
            ParseErrorKind::BadHeader => "bad header",
            ParseErrorKind::DuplicatePeptide => "duplicate peptide id",
            ParseErrorKind::DuplicateSample => "duplicate sample id",
            ParseErrorKind::UnknownSample => "unknown sample id",
            ParseErrorKind::MissingSample => "sample absent from data header",
            ParseErrorKind::NonRectangular => "non-rectangular row",
            ParseErrorKind::InvalidNumber => "invalid number",
            ParseErrorKind::UnexpectedMissing => "unexpected missing value",
        })
    }
}

impl Error {
    /// True when the failure is attributable to user input rather than to the
    /// environment or a bug.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NotPositiveDefinite)
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
