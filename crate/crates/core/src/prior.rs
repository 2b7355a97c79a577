use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conjugate::{NigParams, NiwParams};
use crate::error::{Error, Result};
use crate::group::GroupData;

/// How the prior mean is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mu0 {
    /// Mean of all observed values of the peptide across the compared groups.
    Pooled,
    /// The same value for every peptide.
    Fixed(f64),
    /// One value per peptide id.
    PerPeptide(BTreeMap<String, f64>),
}

/// Prior scale matrix of the inverse-Wishart.
#[derive(Clone, Debug, PartialEq)]
pub enum Sigma0 {
    /// `c * I`.
    ScaledIdentity(f64),
    /// Full matrix indexed by peptide ids; blocks are extracted by id.
    Full {
        peptide_ids: Vec<String>,
        matrix: DMatrix<f64>,
    },
}

impl Sigma0 {
    pub fn identity() -> Self {
        Sigma0::ScaledIdentity(1.0)
    }

    /// Sub-matrix for the given peptides.
    pub fn block(&self, peptide_ids: &[String]) -> Result<DMatrix<f64>> {
        let dim = peptide_ids.len();
        match self {
            Sigma0::ScaledIdentity(c) => Ok(DMatrix::identity(dim, dim) * *c),
            Sigma0::Full {
                peptide_ids: ids,
                matrix,
            } => {
                let idx = peptide_ids
                    .iter()
                    .map(|id| {
                        ids.iter()
                            .position(|x| x == id)
                            .ok_or_else(|| Error::UnknownPeptide(id.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DMatrix::from_fn(dim, dim, |i, j| matrix[(idx[i], idx[j])]))
            }
        }
    }
}

/// Hyper-parameters shared by both compared groups.
///
/// Engines take a single `PriorConfig` for the pair, so the two groups can
/// never be analysed under different priors.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorConfig {
    pub mu0: Mu0,
    pub lambda0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub sigma0: Sigma0,
    pub nu0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mu0: Mu0::Pooled,
            lambda0: 1.0,
            alpha0: 1.0,
            beta0: 1.0,
            sigma0: Sigma0::identity(),
            nu0: 10.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda0", self.lambda0),
            ("alpha0", self.alpha0),
            ("beta0", self.beta0),
            ("nu0", self.nu0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        match &self.mu0 {
            Mu0::Fixed(v) if !v.is_finite() => {
                Err(Error::InvalidParameters("mu0 must be finite".into()))
            }
            Mu0::PerPeptide(m) if m.values().any(|v| !v.is_finite()) => {
                Err(Error::InvalidParameters("mu0 must be finite".into()))
            }
            _ => match self.sigma0 {
                Sigma0::ScaledIdentity(c) if !(c.is_finite() && c > 0.0) => Err(
                    Error::InvalidParameters(format!("sigma0 scale must be > 0, got {c}")),
                ),
                _ => Ok(()),
            },
        }
    }

    /// Prior mean of peptide `peptide`, pooling observed values over `groups`.
    pub fn mu0_for(&self, peptide: &str, groups: &[&GroupData]) -> Result<f64> {
        match &self.mu0 {
            Mu0::Fixed(v) => Ok(*v),
            Mu0::PerPeptide(map) => map
                .get(peptide)
                .copied()
                .ok_or_else(|| Error::UnknownPeptide(peptide.to_string())),
            Mu0::Pooled => {
                let (mut sum, mut count) = (0.0, 0usize);
                for g in groups {
                    let p = g
                        .peptide_index(peptide)
                        .ok_or_else(|| Error::UnknownPeptide(peptide.to_string()))?;
                    for v in g.matrix.observed_column(p) {
                        sum += v;
                        count += 1;
                    }
                }
                if count == 0 {
                    return Err(Error::NoData {
                        peptide: peptide.to_string(),
                        group: groups
                            .iter()
                            .map(|g| g.label.as_str())
                            .collect::<Vec<_>>()
                            .join("+"),
                    });
                }
                Ok(sum / count as f64)
            }
        }
    }

    pub fn nig(&self, mu0: f64) -> Result<NigParams> {
        NigParams::new(mu0, self.lambda0, self.alpha0, self.beta0)
    }

    pub fn niw(&self, mu0: &[f64], peptide_ids: &[String]) -> Result<NiwParams> {
        let dim = peptide_ids.len();
        if self.nu0.is_finite() && self.nu0 <= dim as f64 - 1.0 {
            return Err(Error::InsufficientDegreesOfFreedom {
                df: self.nu0 - dim as f64 + 1.0,
                nu: self.nu0,
                dim,
            });
        }
        NiwParams::new(
            DVector::from_column_slice(mu0),
            self.lambda0,
            self.sigma0.block(peptide_ids)?,
            self.nu0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::MaskedMatrix;

    #[test]
    fn defaults_are_the_reference_values() {
        let p = PriorConfig::default();
        assert_eq!(p.mu0, Mu0::Pooled);
        assert_eq!((p.lambda0, p.alpha0, p.beta0, p.nu0), (1.0, 1.0, 1.0, 10.0));
        assert_eq!(p.sigma0, Sigma0::identity());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn pooled_mean_uses_observed_values_of_both_groups() {
        let a = GroupData::new(
            "a",
            vec!["x".into()],
            None,
            MaskedMatrix::from_rows(&[vec![Some(1.0)], vec![None]]).unwrap(),
        )
        .unwrap();
        let b = GroupData::new(
            "b",
            vec!["x".into()],
            None,
            MaskedMatrix::from_rows(&[vec![Some(4.0)], vec![Some(7.0)]]).unwrap(),
        )
        .unwrap();
        let p = PriorConfig::default();
        assert_eq!(p.mu0_for("x", &[&a, &b]).unwrap(), 4.0);
        assert!(p.mu0_for("y", &[&a]).is_err());
    }

    #[test]
    fn sigma_blocks_by_id() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let s = Sigma0::Full {
            peptide_ids: ids,
            matrix: m,
        };
        let b = s.block(&["c".to_string(), "a".to_string()]).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[8.0, 6.0, 2.0, 0.0]));
        assert!(s.block(&["z".to_string()]).is_err());
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let p = PriorConfig {
            nu0: 0.0,
            ..PriorConfig::default()
        };
        assert!(p.validate().is_err());
        let p = PriorConfig {
            sigma0: Sigma0::ScaledIdentity(-1.0),
            ..PriorConfig::default()
        };
        assert!(p.validate().is_err());
    }
}
