//! Minimal cost-complexity pruning.

use serde::{Deserialize, Serialize};

use super::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub step: usize,
    pub alpha: f64,
    pub leaves: usize,
    /// Training cost per sample.
    pub cost: f64,
}

struct Branch {
    cost: f64,
    leaves: usize,
}

/// Fills in `collapse_step` on internal nodes and the tree's `prune_alphas`.
///
/// Step 0 removes splits that do not lower the training cost; each later
/// step collapses every node attaining the smallest cost per removed leaf.
pub(crate) fn annotate(tree: &mut Tree) {
    let n = tree.n_train as f64;
    let r: Vec<f64> = tree.nodes.iter().map(|t| t.leaf_cost / n).collect();
    let eps = 1e-12 * r[0].max(f64::MIN_POSITIVE);
    let mut collapse: Vec<Option<usize>> = vec![None; tree.nodes.len()];

    // Children always carry larger indices than their parent, so a reverse
    // sweep visits subtrees before their roots.
    let branches = |collapse: &[Option<usize>]| -> Vec<Branch> {
        let mut b: Vec<Branch> = r.iter().map(|&c| Branch { cost: c, leaves: 1 }).collect();
        for i in (0..tree.nodes.len()).rev() {
            let node = &tree.nodes[i];
            if let (Some(l), Some(rr), None) = (node.left, node.right, collapse[i]) {
                b[i] = Branch {
                    cost: b[l].cost + b[rr].cost,
                    leaves: b[l].leaves + b[rr].leaves,
                };
            }
        }
        b
    };

    for i in (0..tree.nodes.len()).rev() {
        if tree.nodes[i].is_leaf() {
            continue;
        }
        let b = branches(&collapse);
        if r[i] - b[i].cost <= eps {
            collapse[i] = Some(0);
        }
    }

    let mut alphas = vec![0.0];
    let reachable_internal = |collapse: &[Option<usize>]| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &tree.nodes[i];
            if node.is_leaf() || collapse[i].is_some() {
                continue;
            }
            out.push(i);
            stack.extend(node.left);
            stack.extend(node.right);
        }
        out
    };
    loop {
        let active = reachable_internal(&collapse);
        if active.is_empty() {
            break;
        }
        let b = branches(&collapse);
        let g: Vec<(usize, f64)> = active
            .iter()
            .map(|&i| (i, (r[i] - b[i].cost) / (b[i].leaves - 1) as f64))
            .collect();
        let alpha = g.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let last = *alphas.last().unwrap();
        let step = if alpha <= last + eps {
            alphas.len() - 1
        } else {
            alphas.push(alpha);
            alphas.len() - 1
        };
        for &(i, gi) in &g {
            if gi <= alpha + eps {
                collapse[i] = Some(step);
            }
        }
    }
    for (node, c) in tree.nodes.iter_mut().zip(collapse) {
        node.collapse_step = if node.is_leaf() { None } else { c };
    }
    tree.prune_alphas = alphas;
}

/// The nested subtree sequence with its penalties, sizes and training costs.
pub fn prune_sequence(tree: &Tree) -> Vec<PruneStep> {
    tree.prune_alphas
        .iter()
        .enumerate()
        .map(|(step, &alpha)| PruneStep {
            step,
            alpha,
            leaves: tree.leaves(Some(step)).len(),
            cost: tree.training_cost(Some(step)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{grow, CostMatrix, FeatureMatrix, GrowParams};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree(seed: u64, n: usize) -> Tree {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = rows
            .iter()
            .map(|r| {
                let base = if r[0] > 0.5 { 3 } else { 1 };
                (base + rng.random_range(0..2usize)).min(3)
            })
            .collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let params = GrowParams { min_node_size: 2, max_depth: 6, max_surrogates: 0 };
        grow(&x, &y, &CostMatrix::ordinal(3), &params).unwrap()
    }

    /// Every pruned subtree as (cost, leaves), by brute force.
    fn all_subtrees(tree: &Tree, i: usize) -> Vec<(f64, usize)> {
        let node = &tree.nodes[i];
        let n = tree.n_train as f64;
        let mut out = vec![(node.leaf_cost / n, 1)];
        if let (Some(l), Some(r)) = (node.left, node.right) {
            let ls = all_subtrees(tree, l);
            let rs = all_subtrees(tree, r);
            for a in &ls {
                for b in &rs {
                    out.push((a.0 + b.0, a.1 + b.1));
                }
            }
        }
        out
    }

    #[test]
    fn alphas_strictly_increase_and_end_at_root() {
        for seed in 0..5 {
            let t = random_tree(seed, 60);
            assert_eq!(t.prune_alphas[0], 0.0);
            assert!(t.prune_alphas.windows(2).all(|w| w[1] > w[0]));
            let seq = prune_sequence(&t);
            assert_eq!(seq.last().unwrap().leaves, 1);
            assert!(seq.windows(2).all(|w| w[1].leaves < w[0].leaves));
        }
    }

    #[test]
    fn sequence_matches_brute_force_optimum() {
        for seed in 0..4 {
            let t = random_tree(seed, 40);
            let subtrees = all_subtrees(&t, 0);
            let seq = prune_sequence(&t);
            for s in &seq {
                // Check at the penalty itself and halfway to the next one.
                let next = t.prune_alphas.get(s.step + 1).copied().unwrap_or(s.alpha * 2.0 + 1.0);
                for alpha in [s.alpha, (s.alpha + next) / 2.0] {
                    let best = subtrees
                        .iter()
                        .map(|(c, l)| c + alpha * *l as f64)
                        .fold(f64::INFINITY, f64::min);
                    let ours = s.cost + alpha * s.leaves as f64;
                    assert!((ours - best).abs() < 1e-9, "seed {seed} step {} alpha {alpha}", s.step);
                }
            }
        }
    }

    #[test]
    fn zero_gain_splits_collapse_at_step_zero() {
        let t = random_tree(11, 80);
        for i in t.internal_nodes(Some(0)) {
            let node = &t.nodes[i];
            let branch: f64 = t
                .leaves(None)
                .iter()
                .filter(|&&l| is_descendant(&t, i, l))
                .map(|&l| t.nodes[l].leaf_cost)
                .sum();
            assert!(branch < node.leaf_cost);
        }
        assert!((t.training_cost(Some(0)) - t.training_cost(None)).abs() < 1e-12);
    }

    fn is_descendant(t: &Tree, anc: usize, mut i: usize) -> bool {
        loop {
            if i == anc {
                return true;
            }
            match t.nodes.iter().position(|n| n.left == Some(i) || n.right == Some(i)) {
                Some(p) => i = p,
                None => return false,
            }
        }
    }
}
