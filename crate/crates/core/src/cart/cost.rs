use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cost difference below which two labels count as tied.
const LABEL_TIE_TOLERANCE: f64 = 1e-12;

/// Misclassification costs `cost(predicted, true)` over classes `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    k: usize,
    /// Row-major, `entries[(pred - 1) * k + (truth - 1)]`.
    entries: Vec<f64>,
}

impl CostMatrix {
    /// `|k - k'|`, the natural cost for ordinal labels.
    pub fn ordinal(k: usize) -> Self {
        let entries = (0..k)
            .flat_map(|a| (0..k).map(move |b| (a as f64 - b as f64).abs()))
            .collect();
        CostMatrix { k, entries }
    }

    /// 0/1 costs.
    pub fn zero_one(k: usize) -> Self {
        let entries = (0..k)
            .flat_map(|a| (0..k).map(move |b| if a == b { 0.0 } else { 1.0 }))
            .collect();
        CostMatrix { k, entries }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Config("empty cost matrix".into()));
        }
        let mut entries = Vec::with_capacity(k * k);
        for (a, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::Config(format!("cost matrix row {} has {} entries", a + 1, row.len())));
            }
            for (b, v) in row.into_iter().enumerate() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("cost ({}, {}) = {v} is not a nonnegative real", a + 1, b + 1)));
                }
                if a == b && v != 0.0 {
                    return Err(Error::Config(format!("diagonal cost ({}, {}) must be zero", a + 1, b + 1)));
                }
                entries.push(v);
            }
        }
        Ok(CostMatrix { k, entries })
    }

    pub fn class_count(&self) -> usize {
        self.k
    }

    /// Cost of predicting class index `pred` for true class index `truth` (both zero-based).
    #[inline]
    pub fn at(&self, pred: usize, truth: usize) -> f64 {
        self.entries[pred * self.k + truth]
    }

    /// Cost of predicting label `pred` for true label `truth` (both 1-based).
    pub fn cost(&self, pred: usize, truth: usize) -> f64 {
        self.at(pred - 1, truth - 1)
    }

    pub fn scaled(&self, c: f64) -> Self {
        CostMatrix {
            k: self.k,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// `sum_{a,b} cost(a, b) c_a c_b`.
    pub(crate) fn quadratic(&self, counts: &[f64]) -> f64 {
        let mut q = 0.0;
        for a in 0..self.k {
            if counts[a] == 0.0 {
                continue;
            }
            for b in 0..self.k {
                q += self.at(a, b) * counts[a] * counts[b];
            }
        }
        q
    }

    /// `(cost + cost^T) c`, the gradient of [`Self::quadratic`].
    pub(crate) fn symmetric_product(&self, counts: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..self.k)
                .map(|b| (self.at(a, b) + self.at(b, a)) * counts[b])
                .sum();
        }
    }

    /// Cheapest label (1-based) for a node with these class counts and the
    /// total cost of predicting it. Ties, up to rounding, go to the lowest class.
    pub fn best_label(&self, counts: &[usize]) -> (usize, f64) {
        let mut best = (1, f64::INFINITY);
        for pred in 0..self.k {
            let c: f64 = counts
                .iter()
                .enumerate()
                .map(|(truth, &n)| self.at(pred, truth) * n as f64)
                .sum();
            if best.1.is_infinite() || c < best.1 * (1.0 - LABEL_TIE_TOLERANCE) {
                best = (pred + 1, c);
            }
        }
        best
    }
}

/// Cost-generalised Gini impurity `sum_{k != k'} cost(k, k') p(k) p(k')`.
pub fn impurity(class_counts: &[usize], cost: &CostMatrix) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("node has no samples"));
    }
    if class_counts.len() != cost.class_count() {
        return Err(Error::Config(format!(
            "{} class counts for a {}-class cost matrix",
            class_counts.len(),
            cost.class_count()
        )));
    }
    let p: Vec<f64> = class_counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(cost.quadratic(&p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impurity_hand_values() {
        let g = CostMatrix::ordinal(5);
        assert_eq!(impurity(&[4, 0, 0, 0, 0], &g).unwrap(), 0.0);
        assert!((impurity(&[5, 0, 0, 0, 5], &g).unwrap() - 2.0).abs() < 1e-12);
        assert!((impurity(&[1, 1, 1, 1, 1], &g).unwrap() - 1.6).abs() < 1e-12);
        assert!(matches!(impurity(&[0; 5], &g), Err(Error::Empty(_))));
    }

    #[test]
    fn ordinal_matrix_entries() {
        let g = CostMatrix::ordinal(5);
        assert_eq!(g.cost(1, 5), 4.0);
        assert_eq!(g.cost(3, 3), 0.0);
        assert_eq!(g.rows()[1], vec![1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn best_label_minimises_expected_cost() {
        let g = CostMatrix::ordinal(5);
        // Median minimises absolute loss.
        assert_eq!(g.best_label(&[3, 0, 0, 0, 2]).0, 1);
        assert_eq!(g.best_label(&[2, 0, 1, 0, 2]).0, 3);
        // Tie between 1 and 2 resolves to the lower class.
        assert_eq!(g.best_label(&[1, 1, 0, 0, 0]), (1, 1.0));
    }

    #[test]
    fn from_rows_validates() {
        assert!(CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(CostMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![0.0], vec![1.0, 0.0]]).is_err());
    }
}
