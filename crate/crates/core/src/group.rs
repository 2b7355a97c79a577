use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Samples x peptides matrix of log-intensities with a missing-value mask.
///
/// Storage is column-major (one contiguous column per peptide). Missing cells
/// hold `NaN` and are never read as values.
#[derive(Clone, Debug)]
pub struct MaskedMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl PartialEq for MaskedMatrix {
    /// Same shape, same mask, bit-identical observed values.
    fn eq(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.missing == other.missing
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.missing)
                .all(|((a, b), &m)| m || a.to_bits() == b.to_bits())
    }
}

impl MaskedMatrix {
    /// Build from row-major cells, `None` marking a missing value.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self {
            nrows,
            ncols,
            values: vec![f64::NAN; nrows * ncols],
            missing: vec![true; nrows * ncols],
        };
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::Dimension {
                    expected: ncols,
                    found: row.len(),
                });
            }
            for (p, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    m.set(i, p, *v)?;
                }
            }
        }
        Ok(m)
    }

    /// A fully observed matrix.
    pub fn complete(data: &DMatrix<f64>) -> Result<Self> {
        let mut m = Self::empty(data.nrows(), data.ncols());
        for p in 0..data.ncols() {
            for i in 0..data.nrows() {
                m.set(i, p, data[(i, p)])?;
            }
        }
        Ok(m)
    }

    /// All cells missing.
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            values: vec![f64::NAN; nrows * ncols],
            missing: vec![true; nrows * ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        col * self.nrows + row
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite value {value} at row {row}, column {col}"
            )));
        }
        let k = self.idx(row, col);
        self.values[k] = value;
        self.missing[k] = false;
        Ok(())
    }

    pub fn set_missing(&mut self, row: usize, col: usize) {
        let k = self.idx(row, col);
        self.values[k] = f64::NAN;
        self.missing[k] = true;
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let k = self.idx(row, col);
        (!self.missing[k]).then_some(self.values[k])
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[self.idx(row, col)]
    }

    /// Observed values of column `col`, in row order.
    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        let start = col * self.nrows;
        self.values[start..start + self.nrows]
            .iter()
            .zip(&self.missing[start..start + self.nrows])
            .filter(|(_, m)| !**m)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    /// Fraction of masked cells; 0 for an empty matrix.
    pub fn missingness_ratio(&self) -> f64 {
        if self.missing.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.missing.len() as f64
        }
    }

    /// Dense copy, or `None` if any cell is missing.
    pub fn to_complete(&self) -> Option<DMatrix<f64>> {
        (self.missing_count() == 0)
            .then(|| DMatrix::from_column_slice(self.nrows, self.ncols, &self.values))
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::empty(self.nrows, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            let src = c * self.nrows;
            let dst = j * self.nrows;
            out.values[dst..dst + self.nrows].copy_from_slice(&self.values[src..src + self.nrows]);
            out.missing[dst..dst + self.nrows].copy_from_slice(&self.missing[src..src + self.nrows]);
        }
        out
    }

    /// Append rows that are missing in every column.
    pub fn with_missing_rows(&self, extra: usize) -> Self {
        let n = self.nrows + extra;
        let mut out = Self::empty(n, self.ncols);
        for p in 0..self.ncols {
            for i in 0..self.nrows {
                if let Some(v) = self.get(i, p) {
                    out.values[p * n + i] = v;
                    out.missing[p * n + i] = false;
                }
            }
        }
        out
    }
}

/// Intensities of one experimental condition.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupData {
    pub label: String,
    pub peptide_ids: Vec<String>,
    /// Protein of each peptide, when known.
    pub proteins: Option<Vec<String>>,
    pub matrix: MaskedMatrix,
    /// Set when the matrix holds imputed values in place of missing ones.
    pub pre_imputed: bool,
}

impl GroupData {
    pub fn new(
        label: impl Into<String>,
        peptide_ids: Vec<String>,
        proteins: Option<Vec<String>>,
        matrix: MaskedMatrix,
    ) -> Result<Self> {
        let label = label.into();
        if matrix.nrows() == 0 {
            return Err(Error::InvalidInput(format!("group '{label}' has no samples")));
        }
        if peptide_ids.len() != matrix.ncols() {
            return Err(Error::Dimension {
                expected: matrix.ncols(),
                found: peptide_ids.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = peptide_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate peptide id '{dup}'")));
        }
        if let Some(p) = &proteins {
            if p.len() != peptide_ids.len() {
                return Err(Error::Dimension {
                    expected: peptide_ids.len(),
                    found: p.len(),
                });
            }
        }
        Ok(Self {
            label,
            peptide_ids,
            proteins,
            matrix,
            pre_imputed: false,
        })
    }

    pub fn with_pre_imputed(mut self, flag: bool) -> Self {
        self.pre_imputed = flag;
        self
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_peptides(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn peptide_index(&self, id: &str) -> Option<usize> {
        self.peptide_ids.iter().position(|p| p == id)
    }

    /// Sub-group restricted to the given peptide columns.
    pub fn select(&self, cols: &[usize]) -> Self {
        Self {
            label: self.label.clone(),
            peptide_ids: cols.iter().map(|&c| self.peptide_ids[c].clone()).collect(),
            proteins: self
                .proteins
                .as_ref()
                .map(|p| cols.iter().map(|&c| p[c].clone()).collect()),
            matrix: self.matrix.select_columns(cols),
            pre_imputed: self.pre_imputed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_and_observed_values() {
        let m = MaskedMatrix::from_rows(&[
            vec![Some(1.0), None],
            vec![Some(2.0), Some(5.0)],
            vec![None, Some(6.0)],
        ])
        .unwrap();
        assert_eq!(m.observed_column(0), vec![1.0, 2.0]);
        assert_eq!(m.observed_column(1), vec![5.0, 6.0]);
        assert!(m.is_missing(2, 0));
        assert_eq!(m.get(1, 1), Some(5.0));
        assert_eq!(m.missing_count(), 2);
        assert!(m.to_complete().is_none());
        assert_eq!(m.select_columns(&[1]).observed_column(0), vec![5.0, 6.0]);
        assert_eq!(m.with_missing_rows(2).observed_column(0), vec![1.0, 2.0]);
    }

    #[test]
    fn missingness_ratio_counts_cells() {
        let complete = MaskedMatrix::complete(&DMatrix::zeros(3, 10)).unwrap();
        assert_eq!(complete.missingness_ratio(), 0.0);
        let mut m = complete.clone();
        m.set_missing(0, 0);
        m.set_missing(1, 4);
        m.set_missing(2, 9);
        assert!((m.missingness_ratio() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn group_invariants() {
        let m = MaskedMatrix::complete(&DMatrix::zeros(2, 2)).unwrap();
        assert!(GroupData::new("a", vec!["x".into(), "x".into()], None, m.clone()).is_err());
        assert!(GroupData::new("a", vec!["x".into()], None, m.clone()).is_err());
        assert!(GroupData::new("a", vec![], None, MaskedMatrix::empty(0, 0)).is_err());
        assert!(GroupData::new("a", vec!["x".into(), "y".into()], None, m).is_ok());
    }
}
