//! Growing and evaluating cost-sensitive classification trees.

use serde::{Deserialize, Serialize};

use super::cost::CostMatrix;
use super::data::FeatureMatrix;
use super::prune;
use crate::error::{Error, Result};

/// Splits must decrease node impurity by more than this fraction of it.
const MIN_RELATIVE_GAIN: f64 = 1e-10;
/// Gains closer than this fraction of the node's impurity count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowParams {
    /// Smallest number of samples allowed in either child of a split.
    pub min_node_size: usize,
    pub max_depth: usize,
    /// Surrogate splits kept per node; zero skips their computation.
    pub max_surrogates: usize,
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams {
            min_node_size: 5,
            max_depth: 30,
            max_surrogates: 5,
        }
    }
}

/// Axis-parallel split. Samples with `x[feature] <= threshold` go left when
/// `le_goes_left`, right otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub le_goes_left: bool,
}

impl Split {
    #[inline]
    pub fn goes_left(&self, v: f64) -> bool {
        (v <= self.threshold) == self.le_goes_left
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub split: Split,
    /// Fraction of the node's samples sent the same way as by the primary split.
    pub agreement: f64,
    /// Impurity decrease the surrogate achieves on its own, weighted by node size.
    pub impurity_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    pub n: usize,
    pub class_counts: Vec<usize>,
    /// Cost-minimising label (1-based).
    pub label: usize,
    pub impurity: f64,
    /// Total cost of the node's samples when it predicts `label`.
    pub leaf_cost: f64,
    pub split: Option<Split>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// `(n_node / n_root) * (impurity drop of the primary split)`.
    pub impurity_decrease: f64,
    pub surrogates: Vec<Surrogate>,
    /// Direction taken when neither the split nor a surrogate can be evaluated.
    pub majority_left: bool,
    /// Pruning step from which this node is a leaf; `None` for true leaves.
    pub collapse_step: Option<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    fn is_leaf_at(&self, step: Option<usize>) -> bool {
        match (self.split, step, self.collapse_step) {
            (None, _, _) => true,
            (Some(_), Some(s), Some(c)) => c <= s,
            _ => false,
        }
    }
}

/// A maximal tree together with its cost-complexity pruning sequence.
///
/// Subtree `s` of the sequence is obtained by turning every node whose
/// `collapse_step <= s` into a leaf; `prune_alphas[s]` is the smallest
/// complexity penalty for which that subtree is optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature_names: Vec<String>,
    pub class_count: usize,
    pub params: GrowParams,
    pub n_train: usize,
    pub nodes: Vec<Node>,
    pub prune_alphas: Vec<f64>,
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    classes: Vec<usize>,
    cost: &'a CostMatrix,
    params: GrowParams,
    n_root: usize,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn counts(&self, samples: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.cost.class_count()];
        for &i in samples {
            c[self.classes[i]] += 1;
        }
        c
    }

    fn sorted_by(&self, samples: &[usize], feature: usize) -> Vec<usize> {
        let col = self.x.column(feature);
        let mut order = samples.to_vec();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        order
    }

    /// `n_t * (impurity drop)` of the best split of `feature`, scanning
    /// thresholds in increasing order.
    fn scan_feature(&self, samples: &[usize], feature: usize, counts: &[f64], q_parent: f64) -> Option<Candidate> {
        let k = self.cost.class_count();
        let col = self.x.column(feature);
        let order = self.sorted_by(samples, feature);
        let n = order.len();
        let min = self.params.min_node_size.max(1);
        if n < 2 * min || col[order[0]] == col[order[n - 1]] {
            return None;
        }
        let mut u_left = vec![0.0; k];
        let mut u_right = vec![0.0; k];
        self.cost.symmetric_product(counts, &mut u_right);
        let (mut q_left, mut q_right) = (0.0, q_parent);
        let parent_term = q_parent / n as f64;
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let a = self.classes[order[i]];
            let diag = self.cost.at(a, a);
            q_left += u_left[a] + diag;
            q_right += diag - u_right[a];
            for b in 0..k {
                let w = self.cost.at(b, a) + self.cost.at(a, b);
                u_left[b] += w;
                u_right[b] -= w;
            }
            let nl = i + 1;
            let nr = n - nl;
            let (lo, hi) = (col[order[i]], col[order[i + 1]]);
            if nl < min || nr < min || lo == hi {
                continue;
            }
            let gain = parent_term - q_left / nl as f64 - q_right / nr as f64;
            if best.as_ref().is_none_or(|b| gain > b.gain + TIE_TOLERANCE * parent_term) {
                best = Some(Candidate {
                    feature,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
        best
    }

    fn best_split(&self, samples: &[usize], counts: &[usize]) -> Option<Candidate> {
        let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let q_parent = self.cost.quadratic(&cf);
        let n = samples.len() as f64;
        let mut best: Option<Candidate> = None;
        for f in 0..self.x.p() {
            if let Some(c) = self.scan_feature(samples, f, &cf, q_parent) {
                if best.as_ref().is_none_or(|b| c.gain > b.gain + TIE_TOLERANCE * q_parent / n) {
                    best = Some(c);
                }
            }
        }
        // gain = n_t * drop, impurity = q / n_t^2
        best.filter(|b| b.gain > MIN_RELATIVE_GAIN * q_parent / n)
    }

    fn split_gain(&self, samples: &[usize], split: &Split, counts: &[usize]) -> f64 {
        let col = self.x.column(split.feature);
        let left: Vec<usize> = samples.iter().copied().filter(|&i| split.goes_left(col[i])).collect();
        let right: Vec<usize> = samples.iter().copied().filter(|&i| !split.goes_left(col[i])).collect();
        if left.is_empty() || right.is_empty() {
            return 0.0;
        }
        let q = |c: Vec<usize>| {
            let cf: Vec<f64> = c.into_iter().map(|v| v as f64).collect();
            self.cost.quadratic(&cf)
        };
        let parent = q(counts.to_vec()) / samples.len() as f64;
        let drop = parent - q(self.counts(&left)) / left.len() as f64 - q(self.counts(&right)) / right.len() as f64;
        drop.max(0.0) / self.n_root as f64
    }

    fn surrogates(&self, samples: &[usize], primary: &Split, counts: &[usize]) -> Vec<Surrogate> {
        let pcol = self.x.column(primary.feature);
        let n = samples.len();
        let n_left = samples.iter().filter(|&&i| primary.goes_left(pcol[i])).count();
        let majority = n_left.max(n - n_left) as f64 / n as f64;
        let mut found = Vec::new();
        for f in 0..self.x.p() {
            if f == primary.feature {
                continue;
            }
            let col = self.x.column(f);
            let order = self.sorted_by(samples, f);
            if col[order[0]] == col[order[n - 1]] {
                continue;
            }
            let mut left_agree = 0usize;
            let mut best: Option<(f64, Split)> = None;
            for i in 0..n - 1 {
                if primary.goes_left(pcol[order[i]]) {
                    left_agree += 1;
                }
                let (lo, hi) = (col[order[i]], col[order[i + 1]]);
                if lo == hi {
                    continue;
                }
                let nl = i + 1;
                // Samples the primary sends left among the first nl, plus those it
                // sends right among the rest.
                let agree = (left_agree + (n - n_left) - (nl - left_agree)) as f64 / n as f64;
                let threshold = midpoint(lo, hi);
                for (a, le_goes_left) in [(agree, true), (1.0 - agree, false)] {
                    if best.as_ref().is_none_or(|b| a > b.0) {
                        best = Some((a, Split { feature: f, threshold, le_goes_left }));
                    }
                }
            }
            if let Some((agreement, split)) = best {
                if agreement > majority + 1e-12 {
                    found.push(Surrogate {
                        split,
                        agreement,
                        impurity_decrease: self.split_gain(samples, &split, counts),
                    });
                }
            }
        }
        found.sort_by(|a, b| {
            b.agreement
                .total_cmp(&a.agreement)
                .then(a.split.feature.cmp(&b.split.feature))
        });
        found.truncate(self.params.max_surrogates);
        found
    }

    fn grow(&self) -> Vec<Node> {
        let mut nodes: Vec<Node> = Vec::new();
        let all: Vec<usize> = (0..self.x.n()).collect();
        let mut stack = vec![(all, 0usize, None::<(usize, bool)>)];
        while let Some((samples, depth, parent)) = stack.pop() {
            let counts = self.counts(&samples);
            let (label, leaf_cost) = self.cost.best_label(&counts);
            let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let n = samples.len();
            let impurity = self.cost.quadratic(&cf) / (n * n) as f64;
            let idx = nodes.len();
            if let Some((p, is_left)) = parent {
                if is_left {
                    nodes[p].left = Some(idx);
                } else {
                    nodes[p].right = Some(idx);
                }
            }
            let mut node = Node {
                depth,
                n,
                class_counts: counts.clone(),
                label,
                impurity,
                leaf_cost,
                split: None,
                left: None,
                right: None,
                impurity_decrease: 0.0,
                surrogates: Vec::new(),
                majority_left: true,
                collapse_step: None,
            };
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let candidate = if pure || depth >= self.params.max_depth {
                None
            } else {
                self.best_split(&samples, &counts)
            };
            match candidate {
                None => nodes.push(node),
                Some(c) => {
                    let split = Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        le_goes_left: true,
                    };
                    let col = self.x.column(c.feature);
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&i| split.goes_left(col[i]));
                    node.split = Some(split);
                    node.impurity_decrease = c.gain / self.n_root as f64;
                    node.majority_left = left.len() >= right.len();
                    if self.params.max_surrogates > 0 {
                        node.surrogates = self.surrogates(&samples, &split, &counts);
                    }
                    nodes.push(node);
                    // Right pushed first so the left subtree is numbered first.
                    stack.push((right, depth + 1, Some((idx, false))));
                    stack.push((left, depth + 1, Some((idx, true))));
                }
            }
        }
        nodes
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Grows a maximal tree on `(x, y)` and computes its pruning sequence.
/// Labels are 1-based class indices.
pub fn grow(x: &FeatureMatrix, y: &[usize], cost: &CostMatrix, params: &GrowParams) -> Result<Tree> {
    if y.len() != x.n() {
        return Err(Error::InvalidDataset(format!(
            "{} labels for {} rows",
            y.len(),
            x.n()
        )));
    }
    if y.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let k = cost.class_count();
    if let Some(&bad) = y.iter().find(|&&l| l == 0 || l > k) {
        return Err(Error::InvalidDataset(format!("label {bad} outside 1..={k}")));
    }
    if x.columns().iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite training feature value".into()));
    }
    let grower = Grower {
        x,
        classes: y.iter().map(|&l| l - 1).collect(),
        cost,
        params: *params,
        n_root: y.len(),
    };
    let mut tree = Tree {
        feature_names: x.names().to_vec(),
        class_count: k,
        params: *params,
        n_train: y.len(),
        nodes: grower.grow(),
        prune_alphas: Vec::new(),
    };
    prune::annotate(&mut tree);
    Ok(tree)
}

impl Tree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Number of subtrees in the pruning sequence.
    pub fn subtree_count(&self) -> usize {
        self.prune_alphas.len()
    }

    /// Index of the last subtree whose penalty does not exceed `alpha`.
    pub fn step_for_alpha(&self, alpha: f64) -> usize {
        self.prune_alphas
            .iter()
            .rposition(|&a| a <= alpha)
            .unwrap_or(0)
    }

    fn leaf_for(&self, row: &[f64], step: Option<usize>) -> &Node {
        let mut node = &self.nodes[0];
        while !node.is_leaf_at(step) {
            let split = node.split.expect("internal node has a split");
            let go_left = {
                let v = row[split.feature];
                if !v.is_nan() {
                    split.goes_left(v)
                } else {
                    node.surrogates
                        .iter()
                        .find(|s| !row[s.split.feature].is_nan())
                        .map_or(node.majority_left, |s| s.split.goes_left(row[s.split.feature]))
                }
            };
            let next = if go_left { node.left } else { node.right };
            node = &self.nodes[next.expect("internal node has children")];
        }
        node
    }

    /// Label predicted by the maximal tree. `NaN` entries count as missing and
    /// are routed by surrogates, then by the majority direction.
    pub fn predict(&self, row: &[f64]) -> usize {
        self.leaf_for(row, None).label
    }

    /// Label predicted by subtree `step` of the pruning sequence.
    pub fn predict_at(&self, row: &[f64], step: usize) -> usize {
        self.leaf_for(row, Some(step)).label
    }

    /// Indices of nodes that are internal in subtree `step` (`None`: maximal tree).
    pub fn internal_nodes(&self, step: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.is_leaf_at(step) {
                continue;
            }
            out.push(i);
            stack.extend(node.right);
            stack.extend(node.left);
        }
        out
    }

    pub fn leaves(&self, step: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.is_leaf_at(step) {
                out.push(i);
            } else {
                stack.extend(node.right);
                stack.extend(node.left);
            }
        }
        out
    }

    /// Training cost per sample of subtree `step` (`None`: maximal tree).
    pub fn training_cost(&self, step: Option<usize>) -> f64 {
        self.leaves(step)
            .iter()
            .map(|&i| self.nodes[i].leaf_cost)
            .sum::<f64>()
            / self.n_train as f64
    }

    /// Features used by primary splits of subtree `step`.
    pub fn split_features(&self, step: Option<usize>) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .internal_nodes(step)
            .iter()
            .filter_map(|&i| self.nodes[i].split.map(|s| s.feature))
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Total cost of predictions against true labels.
pub fn total_cost(pred: &[usize], truth: &[usize], cost: &CostMatrix) -> f64 {
    pred.iter().zip(truth).map(|(&p, &t)| cost.cost(p, t)).sum()
}
