use crate::error::{Error, Result};

/// Column-major feature table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some((k, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidDataset(format!(
                "column {} has {} rows, expected {n}",
                names[k],
                c.len()
            )));
        }
        Ok(FeatureMatrix { names, columns, n })
    }

    /// Builds from rows; column names default to `x1, x2, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDataset("ragged rows".into()));
        }
        let columns = (0..p).map(|k| rows.iter().map(|r| r[k]).collect()).collect();
        let names = (0..p).map(|k| format!("x{}", k + 1)).collect();
        FeatureMatrix::new(names, columns)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            n: rows.len(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: cols.iter().map(|&k| self.names[k].clone()).collect(),
            columns: cols.iter().map(|&k| self.columns[k].clone()).collect(),
            n: self.n,
        }
    }

    /// Columns side by side: `self` first, then `other`.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.p() > 0 && other.p() > 0 && self.n != other.n {
            return Err(Error::InvalidDataset(format!(
                "cannot join tables with {} and {} rows",
                self.n, other.n
            )));
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        FeatureMatrix::new(names, columns)
    }
}
