//! Surrogate-based variable importance, single-tree and bagged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostMatrix;
use super::data::FeatureMatrix;
use super::tree::{grow, GrowParams, Tree};
use crate::error::Result;
use crate::seed;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub names: Vec<String>,
    /// Summed impurity decrease as a percentage of the root impurity.
    pub raw: Vec<f64>,
    /// `raw` rescaled so that the largest entry is 100 (all zero if none is positive).
    pub scaled: Vec<f64>,
}

impl Importance {
    fn from_raw(names: Vec<String>, raw: Vec<f64>) -> Self {
        let max = raw.iter().copied().fold(0.0, f64::max);
        let scaled = raw
            .iter()
            .map(|&v| if max > 0.0 { 100.0 * v / max } else { 0.0 })
            .collect();
        Importance { names, raw, scaled }
    }

    pub fn max_raw(&self) -> f64 {
        self.raw.iter().copied().fold(0.0, f64::max)
    }

    /// Feature indices by decreasing importance, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.raw.len()).collect();
        idx.sort_by(|&a, &b| self.raw[b].total_cmp(&self.raw[a]).then(a.cmp(&b)));
        idx
    }
}

/// Importance in subtree `step` of `tree` (`None`: the maximal tree). Each
/// internal node credits the best surrogate's feature with that surrogate's
/// own decrease and, if `include_primary`, the split feature with the split's.
pub fn tree_importance(tree: &Tree, step: Option<usize>, include_primary: bool) -> Importance {
    let mut raw = vec![0.0; tree.feature_names.len()];
    let root = tree.root().impurity;
    if root > 0.0 {
        for i in tree.internal_nodes(step) {
            let node = &tree.nodes[i];
            if include_primary {
                if let Some(s) = node.split {
                    raw[s.feature] += node.impurity_decrease;
                }
            }
            if let Some(s) = node.surrogates.first() {
                raw[s.split.feature] += s.impurity_decrease;
            }
        }
        for v in &mut raw {
            *v *= 100.0 / root;
        }
    }
    Importance::from_raw(tree.feature_names.clone(), raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BagParams {
    pub bootstraps: usize,
    pub seed: u64,
    pub include_primary: bool,
    pub grow: GrowParams,
}

impl Default for BagParams {
    fn default() -> Self {
        BagParams {
            bootstraps: 25,
            seed: 0,
            include_primary: true,
            grow: GrowParams::default(),
        }
    }
}

/// Importance averaged over trees grown on n-out-of-n bootstrap resamples.
/// Each tree is pruned on its out-of-bag samples with the one-standard-error rule.
pub fn bagged_importance(x: &FeatureMatrix, y: &[usize], cost: &CostMatrix, params: &BagParams) -> Result<Importance> {
    let n = y.len();
    let per_tree = (0..params.bootstraps)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let mut rng = seed::rng(params.seed, seed::stream::BOOTSTRAP, b as u64);
            let mut in_bag = vec![false; n];
            let idx: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let yb: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            let tree = grow(&x.select_rows(&idx), &yb, cost, &params.grow)?;
            let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
            let step = oob_step(&tree, x, y, &oob, cost);
            Ok(tree_importance(&tree, Some(step), params.include_primary).raw)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = x.p();
    let mut raw = vec![0.0; p];
    for t in &per_tree {
        for (r, v) in raw.iter_mut().zip(t) {
            *r += v;
        }
    }
    if !per_tree.is_empty() {
        for r in &mut raw {
            *r /= per_tree.len() as f64;
        }
    }
    Ok(Importance::from_raw(x.names().to_vec(), raw))
}

/// Smallest subtree whose out-of-bag cost is within one standard error of the
/// best one, so that splits fitted to noise are pruned away.
fn oob_step(tree: &Tree, x: &FeatureMatrix, y: &[usize], oob: &[usize], cost: &CostMatrix) -> usize {
    if oob.is_empty() {
        return 0;
    }
    let rows: Vec<Vec<f64>> = oob.iter().map(|&i| x.row(i)).collect();
    let per_step: Vec<Vec<f64>> = (0..tree.subtree_count())
        .map(|s| {
            rows.iter()
                .zip(oob)
                .map(|(r, &i)| cost.cost(tree.predict_at(r, s), y[i]))
                .collect()
        })
        .collect();
    let m = oob.len() as f64;
    let means: Vec<f64> = per_step.iter().map(|c| c.iter().sum::<f64>() / m).collect();
    let best = (0..means.len())
        .min_by(|&a, &b| means[a].total_cmp(&means[b]))
        .unwrap_or(0);
    let se = if oob.len() > 1 {
        let mu = means[best];
        (per_step[best].iter().map(|c| (c - mu).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    let limit = means[best] + se + 1e-12 * means[best].abs();
    (0..means.len()).rev().find(|&s| means[s] <= limit).unwrap_or(best)
}
