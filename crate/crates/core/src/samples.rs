use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Univariate,
    Multivariate,
}

/// How the `D` per-imputation posteriors are merged into one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    /// Average the `D` draws of each realisation.
    #[default]
    Average,
    /// Each realisation comes from one uniformly chosen imputation.
    Mixture,
}

impl std::str::FromStr for Combine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(Combine::Average),
            "mixture" => Ok(Combine::Mixture),
            other => Err(format!("unknown combine mode '{other}' (expected average or mixture)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedPeptide {
    pub peptide: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub protein: String,
    pub peptides: usize,
    /// `None` when the block completed.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine: Engine,
    pub seed: u64,
    pub stream: u64,
    pub draws: usize,
    pub imputations: Option<usize>,
    pub combine: Option<Combine>,
    pub skipped: Vec<SkippedPeptide>,
    pub blocks: Vec<BlockReport>,
}

/// Posterior draws of the mean difference `mu_a - mu_b`, one column of `R`
/// draws per peptide.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceSamples {
    pub peptide_ids: Vec<String>,
    pub groups: (String, String),
    pub provenance: Provenance,
    n_draws: usize,
    values: Vec<f64>,
}

impl DifferenceSamples {
    /// `values` holds the draws peptide by peptide (`peptide_ids.len() * n_draws`).
    pub fn new(
        peptide_ids: Vec<String>,
        groups: (String, String),
        n_draws: usize,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.len() != peptide_ids.len() * n_draws {
            return Err(Error::Dimension {
                expected: peptide_ids.len() * n_draws,
                found: values.len(),
            });
        }
        Ok(Self {
            peptide_ids,
            groups,
            provenance,
            n_draws,
            values,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_peptides(&self) -> usize {
        self.peptide_ids.len()
    }

    pub fn peptide(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_draws..(q + 1) * self.n_draws]
    }

    pub fn peptide_by_id(&self, id: &str) -> Option<&[f64]> {
        self.peptide_ids
            .iter()
            .position(|p| p == id)
            .map(|q| self.peptide(q))
    }

    pub fn get(&self, draw: usize, q: usize) -> f64 {
        self.values[q * self.n_draws + draw]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            engine: Engine::Univariate,
            seed: 0,
            stream: 0,
            draws: 2,
            imputations: None,
            combine: None,
            skipped: vec![],
            blocks: vec![],
        }
    }

    #[test]
    fn layout_is_peptide_major() {
        let s = DifferenceSamples::new(
            vec!["a".into(), "b".into()],
            ("x".into(), "y".into()),
            2,
            vec![1.0, 2.0, 3.0, 4.0],
            prov(),
        )
        .unwrap();
        assert_eq!(s.peptide(1), &[3.0, 4.0]);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.peptide_by_id("b"), Some(&[3.0, 4.0][..]));
        assert!(DifferenceSamples::new(vec!["a".into()], ("x".into(), "y".into()), 2, vec![1.0], prov()).is_err());
    }

    #[test]
    fn combine_parses() {
        assert_eq!("Mixture".parse::<Combine>().unwrap(), Combine::Mixture);
        assert!("median".parse::<Combine>().is_err());
    }
}
