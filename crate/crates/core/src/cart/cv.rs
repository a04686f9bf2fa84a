//! Repeated stratified k-fold cross-validation of pruned trees.
//!
//! The maximal tree on the full sample fixes a grid of complexity penalties
//! (geometric midpoints of its pruning sequence). Each fold grows its own
//! tree, prunes it at every grid penalty and is scored on the held-out part.
//! The penalty with the lowest average held-out cost selects the subtree of
//! the full-sample tree.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostMatrix;
use super::data::FeatureMatrix;
use super::tree::{grow, GrowParams, Tree};
use crate::error::{Error, Result};
use crate::seed;

const FOLD_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub one_se_rule: bool,
    pub grow: GrowParams,
}

impl Default for CvParams {
    fn default() -> Self {
        CvParams {
            folds: 10,
            repeats: 5,
            seed: 0,
            one_se_rule: false,
            grow: GrowParams::default(),
        }
    }
}

/// Cross-validated cost of one subtree of the full-sample pruning sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub step: usize,
    pub alpha: f64,
    pub leaves: usize,
    /// Mean held-out cost per sample over all repeats.
    pub cost: f64,
    /// Standard error of `cost` across samples.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Cross-validated cost per sample of the chosen subtree.
    pub cost: f64,
    /// The same quantity for each repeat.
    pub per_repeat: Vec<f64>,
    pub chosen_step: usize,
    pub alpha: f64,
    pub curve: Vec<CvPoint>,
}

/// Fold index (`0..folds`) of every sample. Within each class samples are
/// shuffled and dealt round-robin, continuing where the previous class stopped.
/// Fails if some class present in `y` would be missing from a training part.
pub fn stratified_folds<R: Rng>(y: &[usize], class_count: usize, folds: usize, rng: &mut R) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if y.len() < folds {
        return Err(Error::TooFewSamples(format!("{} samples for {folds} folds", y.len())));
    }
    let mut absent = 0;
    for _ in 0..FOLD_ATTEMPTS {
        let mut assign = vec![0; y.len()];
        let mut next = rng.random_range(0..folds);
        for class in 1..=class_count {
            let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
            members.shuffle(rng);
            for i in members {
                assign[i] = next;
                next = (next + 1) % folds;
            }
        }
        let missing = (1..=class_count).find(|&c| {
            let in_folds: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).map(|i| assign[i]).collect();
            !in_folds.is_empty() && (0..folds).any(|f| in_folds.iter().all(|&g| g == f))
        });
        match missing {
            None => return Ok(assign),
            Some(c) => absent = c,
        }
    }
    Err(Error::ClassAbsent {
        class: absent,
        attempts: FOLD_ATTEMPTS,
    })
}

fn penalty_grid(alphas: &[f64]) -> Vec<f64> {
    (0..alphas.len())
        .map(|k| match alphas.get(k + 1) {
            Some(next) => (alphas[k] * next).sqrt(),
            None => f64::INFINITY,
        })
        .collect()
}

fn without_surrogates(p: &GrowParams) -> GrowParams {
    GrowParams {
        max_surrogates: 0,
        ..*p
    }
}

/// Cross-validates the pruning sequence of `full`, which must have been
/// grown on `(x, y)` with `params.grow`.
fn validate_sequence(full: &Tree, x: &FeatureMatrix, y: &[usize], cost: &CostMatrix, params: &CvParams) -> Result<CvResult> {
    let n = y.len();
    if params.repeats == 0 {
        return Err(Error::Config("cv_repeats must be positive".into()));
    }
    let grid = penalty_grid(&full.prune_alphas);
    let fold_params = without_surrogates(&params.grow);
    let assignments = (0..params.repeats)
        .map(|r| {
            let mut rng = seed::rng(params.seed, seed::stream::CV_FOLDS, r as u64);
            stratified_folds(y, cost.class_count(), params.folds, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..params.repeats)
        .flat_map(|r| (0..params.folds).map(move |f| (r, f)))
        .collect();
    // per_sample[r][k][i]: held-out cost of sample i under penalty k in repeat r.
    let fold_costs = jobs
        .par_iter()
        .map(|&(r, f)| -> Result<Vec<(usize, Vec<f64>)>> {
            let assign = &assignments[r];
            let train: Vec<usize> = (0..n).filter(|&i| assign[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assign[i] == f).collect();
            let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let tree = grow(&x.select_rows(&train), &ytr, cost, &fold_params)?;
            let steps: Vec<usize> = grid.iter().map(|&a| tree.step_for_alpha(a)).collect();
            Ok(test
                .iter()
                .map(|&i| {
                    let row = x.row(i);
                    let c = steps.iter().map(|&s| cost.cost(tree.predict_at(&row, s), y[i])).collect();
                    (i, c)
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let kk = grid.len();
    let mut per_sample = vec![vec![vec![0.0; n]; kk]; params.repeats];
    for (&(r, _), rows) in jobs.iter().zip(fold_costs) {
        for (i, c) in rows {
            for k in 0..kk {
                per_sample[r][k][i] = c[k];
            }
        }
    }
    let reps = params.repeats as f64;
    let curve: Vec<CvPoint> = (0..kk)
        .map(|k| {
            let avg: Vec<f64> = (0..n)
                .map(|i| per_sample.iter().map(|rep| rep[k][i]).sum::<f64>() / reps)
                .collect();
            let mean = avg.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                avg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            CvPoint {
                step: k,
                alpha: full.prune_alphas[k],
                leaves: full.leaves(Some(k)).len(),
                cost: mean,
                se: (var / n as f64).sqrt(),
            }
        })
        .collect();
    let tol = |v: f64| 1e-12 * v.abs().max(1e-300);
    let mut best = 0;
    for k in 1..kk {
        // Ties go to the later, smaller subtree.
        if curve[k].cost <= curve[best].cost + tol(curve[best].cost) {
            best = k;
        }
    }
    let chosen = if params.one_se_rule {
        let limit = curve[best].cost + curve[best].se;
        (0..kk).rev().find(|&k| curve[k].cost <= limit + tol(limit)).unwrap_or(best)
    } else {
        best
    };
    let per_repeat = per_sample
        .iter()
        .map(|rep| rep[chosen].iter().sum::<f64>() / n as f64)
        .collect();
    Ok(CvResult {
        cost: curve[chosen].cost,
        per_repeat,
        chosen_step: chosen,
        alpha: full.prune_alphas[chosen],
        curve,
    })
}

/// Cross-validated expected misclassification cost of a pruned tree on `(x, y)`.
pub fn cv_cost(x: &FeatureMatrix, y: &[usize], cost: &CostMatrix, params: &CvParams) -> Result<CvResult> {
    if y.len() < params.folds {
        return Err(Error::TooFewSamples(format!("{} samples for {} folds", y.len(), params.folds)));
    }
    let full = grow(x, y, cost, &without_surrogates(&params.grow))?;
    validate_sequence(&full, x, y, cost, params)
}

/// Grows the full-sample tree and cross-validates its pruning sequence. The
/// returned tree keeps all subtrees; `CvResult::chosen_step` names the selected one.
pub fn fit_cv(x: &FeatureMatrix, y: &[usize], cost: &CostMatrix, params: &CvParams) -> Result<(Tree, CvResult)> {
    if y.len() < params.folds {
        return Err(Error::TooFewSamples(format!("{} samples for {} folds", y.len(), params.folds)));
    }
    let full = grow(x, y, cost, &params.grow)?;
    let cv = validate_sequence(&full, x, y, cost, params)?;
    Ok((full, cv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(seed: u64) -> CvParams {
        CvParams {
            seed,
            ..CvParams::default()
        }
    }

    #[test]
    fn folds_are_stratified_and_balanced() {
        let y: Vec<usize> = (0..114).map(|i| [1, 1, 2, 3, 4, 5][i % 6]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = stratified_folds(&y, 5, 10, &mut rng).unwrap();
        let mut sizes = [0usize; 10];
        for &g in &f {
            sizes[g] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");
        for class in 1..=5 {
            let mut per = [0usize; 10];
            for i in 0..y.len() {
                if y[i] == class {
                    per[f[i]] += 1;
                }
            }
            assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn singleton_class_cannot_be_folded() {
        let mut y = vec![1; 20];
        y[3] = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            stratified_folds(&y, 2, 10, &mut rng),
            Err(Error::ClassAbsent { class: 2, attempts: 10 })
        ));
    }

    #[test]
    fn too_few_samples() {
        let x = FeatureMatrix::from_rows(&vec![vec![0.0]; 5]).unwrap();
        assert!(matches!(
            cv_cost(&x, &[1, 2, 1, 2, 1], &CostMatrix::ordinal(2), &params(0)),
            Err(Error::TooFewSamples(_))
        ));
    }

    #[test]
    fn separable_data_has_zero_cv_cost() {
        // Class gap wider than the sample spacing, so held-out points never sit
        // on the wrong side of a training midpoint.
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![if i < 30 { i as f64 } else { i as f64 + 100.0 }, ((i * 7) % 13) as f64])
            .collect();
        let y: Vec<usize> = (0..60).map(|i| if i < 30 { 1 } else { 2 }).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let r = cv_cost(&x, &y, &CostMatrix::ordinal(2), &params(4)).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.per_repeat.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn random_labels_cost_about_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let mut y: Vec<usize> = (0..200).map(|i| 1 + i % 2).collect();
        y.shuffle(&mut rng);
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let r = cv_cost(&x, &y, &CostMatrix::ordinal(2), &params(5)).unwrap();
        assert!((r.cost - 0.5).abs() <= 0.1, "{}", r.cost);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = rows.iter().map(|r| if r[0] + 0.3 * r[1] > 0.6 { 2 } else { 1 }).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let a = cv_cost(&x, &y, &CostMatrix::ordinal(2), &params(9)).unwrap();
        let b = cv_cost(&x, &y, &CostMatrix::ordinal(2), &params(9)).unwrap();
        assert_eq!(a, b);
        let (tree, c) = fit_cv(&x, &y, &CostMatrix::ordinal(2), &params(9)).unwrap();
        assert_eq!(a.cost, c.cost);
        assert!(c.chosen_step < tree.subtree_count());
    }
}
