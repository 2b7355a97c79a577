//! Multiple imputation of a group's missing cells for the multivariate engine.
//!
//! Each missing cell of peptide `p` is filled, independently per draw, from the
//! posterior predictive Student-t of that peptide's observed values under the
//! same Normal-Inverse-Gamma prior used for inference. Conditioning never
//! crosses group boundaries and never mixes peptides.

use nalgebra::DMatrix;

use crate::conjugate::{nig_predictive, nig_update, NigParams};
use crate::error::{Error, Result};
use crate::group::{GroupData, MaskedMatrix};
use crate::rng::{label_hash, RngStream};

/// Missingness above which results from imputed data deserve a warning.
pub const DEFAULT_MISSINGNESS_WARNING: f64 = 0.5;

pub const DEFAULT_DRAWS: usize = 7;

/// `D` completed copies of one group's matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputedSet {
    observed: MaskedMatrix,
    draws: Vec<DMatrix<f64>>,
}

impl ImputedSet {
    /// Wrap externally imputed matrices, checking that they agree with the
    /// observed cells and contain no gaps.
    pub fn from_external(observed: MaskedMatrix, draws: Vec<DMatrix<f64>>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidInput("at least one imputed matrix is required".into()));
        }
        for (d, m) in draws.iter().enumerate() {
            if m.nrows() != observed.nrows() || m.ncols() != observed.ncols() {
                return Err(Error::InvalidInput(format!(
                    "imputed matrix {d} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    observed.nrows(),
                    observed.ncols()
                )));
            }
            for p in 0..m.ncols() {
                for i in 0..m.nrows() {
                    let v = m[(i, p)];
                    if !v.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "imputed matrix {d} has a missing or non-finite cell at ({i}, {p})"
                        )));
                    }
                    if let Some(obs) = observed.get(i, p) {
                        if obs.to_bits() != v.to_bits() {
                            return Err(Error::InvalidInput(format!(
                                "imputed matrix {d} alters observed cell ({i}, {p}): {obs} -> {v}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { observed, draws })
    }

    pub fn draws(&self) -> &[DMatrix<f64>] {
        &self.draws
    }

    pub fn d_count(&self) -> usize {
        self.draws.len()
    }

    pub fn observed(&self) -> &MaskedMatrix {
        &self.observed
    }

    pub fn was_missing(&self, row: usize, col: usize) -> bool {
        self.observed.is_missing(row, col)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            observed: self.observed.select_columns(cols),
            draws: self.draws.iter().map(|m| m.select_columns(cols)).collect(),
        }
    }
}

/// Fraction of masked cells in `data`.
pub fn missingness_ratio(data: &MaskedMatrix) -> f64 {
    data.missingness_ratio()
}

/// Fill every missing cell of `group`, `d_count` times.
///
/// `priors[p]` is the NIG prior of peptide `p`. The fill of cell `(n, p)` in
/// draw `d` comes from the sub-stream `rng.derive([hash(peptide id), d])`, so
/// a column's draws are unaffected by the other columns.
pub fn impute(
    group: &GroupData,
    priors: &[NigParams],
    d_count: usize,
    rng: &RngStream,
) -> Result<ImputedSet> {
    if d_count == 0 {
        return Err(Error::InvalidInput("the number of imputation draws must be >= 1".into()));
    }
    let data = &group.matrix;
    if priors.len() != data.ncols() {
        return Err(Error::Dimension {
            expected: data.ncols(),
            found: priors.len(),
        });
    }
    let n = data.nrows();
    let mut base = DMatrix::zeros(n, data.ncols());
    let mut samplers = Vec::with_capacity(data.ncols());
    for p in 0..data.ncols() {
        let observed = data.observed_column(p);
        if observed.is_empty() {
            return Err(Error::Unimputable {
                peptide: group.peptide_ids[p].clone(),
                group: group.label.clone(),
            });
        }
        for i in 0..n {
            base[(i, p)] = data.get(i, p).unwrap_or(f64::NAN);
        }
        let sampler = if observed.len() < n {
            Some(nig_predictive(&nig_update(&priors[p], &observed)?)?.sampler())
        } else {
            None
        };
        samplers.push(sampler);
    }

    let draws = (0..d_count)
        .map(|d| {
            let mut m = base.clone();
            for (p, sampler) in samplers.iter().enumerate() {
                let Some(sampler) = sampler else { continue };
                let mut gen = rng
                    .derive(&[label_hash(&group.peptide_ids[p]), d as u64])
                    .rng();
                for i in 0..n {
                    if data.is_missing(i, p) {
                        m[(i, p)] = sampler.draw(&mut gen);
                    }
                }
            }
            m
        })
        .collect();
    Ok(ImputedSet {
        observed: data.clone(),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> NigParams {
        NigParams::new(0.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn group(rows: &[Vec<Option<f64>>]) -> GroupData {
        let m = MaskedMatrix::from_rows(rows).unwrap();
        let ids = (0..m.ncols()).map(|p| format!("pep{p}")).collect();
        GroupData::new("g", ids, None, m).unwrap()
    }

    #[test]
    fn complete_data_is_copied() {
        let g = group(&[vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]]);
        let set = impute(&g, &[prior(); 2], 4, &RngStream::from_seed(1)).unwrap();
        assert_eq!(set.d_count(), 4);
        let expected = g.matrix.to_complete().unwrap();
        assert!(set.draws().iter().all(|m| *m == expected));
    }

    #[test]
    fn single_missing_cell_varies_alone() {
        let g = group(&[
            vec![Some(1.0), Some(2.0)],
            vec![Some(3.0), None],
            vec![Some(5.0), Some(6.0)],
        ]);
        let set = impute(&g, &[prior(); 2], 7, &RngStream::from_seed(2)).unwrap();
        let first = &set.draws()[0];
        for m in set.draws() {
            for p in 0..2 {
                for i in 0..3 {
                    if (i, p) != (1, 1) {
                        assert_eq!(m[(i, p)].to_bits(), first[(i, p)].to_bits());
                        assert_eq!(Some(m[(i, p)]), g.matrix.get(i, p));
                    }
                }
            }
        }
        let fills: Vec<f64> = set.draws().iter().map(|m| m[(1, 1)]).collect();
        assert!(fills.windows(2).all(|w| w[0] != w[1]));
        assert!(set.was_missing(1, 1));
    }

    #[test]
    fn unimputable_column_is_named() {
        let g = group(&[vec![Some(1.0), None], vec![Some(2.0), None]]);
        match impute(&g, &[prior(); 2], 2, &RngStream::from_seed(0)) {
            Err(Error::Unimputable { peptide, .. }) => assert_eq!(peptide, "pep1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn predictive_mean_of_fills() {
        // observed [2, 2, 2] under (0, 1, 1, 1): predictive location mu_N = 1.5
        let g = group(&[vec![Some(2.0)], vec![Some(2.0)], vec![Some(2.0)], vec![None]]);
        let set = impute(&g, &[prior()], 10_000, &RngStream::from_seed(3)).unwrap();
        let mean = set.draws().iter().map(|m| m[(3, 0)]).sum::<f64>() / 10_000.0;
        assert!((mean - 1.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn columns_are_imputed_independently() {
        let rows_a = [vec![Some(1.0), Some(9.0)], vec![None, Some(8.0)], vec![Some(2.0), None]];
        let rows_b = [vec![Some(1.0), Some(-40.0)], vec![None, None], vec![Some(2.0), Some(3.0)]];
        let a = impute(&group(&rows_a), &[prior(); 2], 3, &RngStream::from_seed(4)).unwrap();
        let b = impute(&group(&rows_b), &[prior(); 2], 3, &RngStream::from_seed(4)).unwrap();
        for d in 0..3 {
            assert_eq!(a.draws()[d][(1, 0)].to_bits(), b.draws()[d][(1, 0)].to_bits());
        }
    }

    #[test]
    fn deterministic_under_stream() {
        let g = group(&[vec![Some(1.0), None], vec![None, Some(2.0)]]);
        let s = RngStream::new(5, 5);
        assert_eq!(impute(&g, &[prior(); 2], 3, &s).unwrap(), impute(&g, &[prior(); 2], 3, &s).unwrap());
    }

    #[test]
    fn external_matrices_are_validated() {
        let observed = MaskedMatrix::from_rows(&[vec![Some(1.0)], vec![None]]).unwrap();
        let good = DMatrix::from_column_slice(2, 1, &[1.0, 4.0]);
        assert!(ImputedSet::from_external(observed.clone(), vec![good]).is_ok());
        let altered = DMatrix::from_column_slice(2, 1, &[1.5, 4.0]);
        assert!(ImputedSet::from_external(observed.clone(), vec![altered]).is_err());
        let gap = DMatrix::from_column_slice(2, 1, &[1.0, f64::NAN]);
        assert!(ImputedSet::from_external(observed.clone(), vec![gap]).is_err());
        assert!(ImputedSet::from_external(observed, vec![]).is_err());
    }
}
