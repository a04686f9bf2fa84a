//! Cost-sensitive classification trees: growing, pruning, cross-validation
//! and variable importance.

mod cost;
mod cv;
mod data;
mod importance;
mod prune;
mod tree;

pub use cost::{impurity, CostMatrix};
pub use cv::{cv_cost, fit_cv, stratified_folds, CvParams, CvPoint, CvResult};
pub use data::FeatureMatrix;
pub use importance::{bagged_importance, tree_importance, BagParams, Importance};
pub use prune::{prune_sequence, PruneStep};
pub use tree::{grow, total_cost, GrowParams, Node, Split, Surrogate, Tree};
