//! CART regression trees and the ensembles built from them, with split-count
//! feature importance.

mod forest;
mod gbm;
mod tree;

pub use forest::{fit_forest, tree_stream, ForestModel, ForestParams};
pub use gbm::{fit_gbm, fit_gbm_traced, fraction_count, GbmModel, GbmParams};
pub use tree::{
    best_split, fit_tree, midpoint, predict_tree, tie_tolerance, Node, RegressionTree, SplitChoice,
    TreeParams,
};

/// Per-feature split counts (the F score) and the resulting ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureImportance {
    pub counts: Vec<usize>,
    /// Feature indices sorted by count descending, ties by index.
    pub ranking: Vec<usize>,
}

impl FeatureImportance {
    pub fn from_trees<'a, F: crate::num::Real + 'a>(
        n_features: usize,
        trees: impl IntoIterator<Item = &'a RegressionTree<F>>,
    ) -> Self {
        let mut counts = vec![0; n_features];
        for t in trees {
            for f in t.split_features() {
                if f >= counts.len() {
                    counts.resize(f + 1, 0);
                }
                counts[f] += 1;
            }
        }
        let mut ranking: Vec<usize> = (0..counts.len()).collect();
        ranking.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        Self { counts, ranking }
    }

    /// 1-based rank of every feature.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.counts.len()];
        for (pos, &f) in self.ranking.iter().enumerate() {
            ranks[f] = pos + 1;
        }
        ranks
    }
}

/// Models whose trees can be inspected for split counts.
pub trait TreeEnsemble<F> {
    fn ensemble_trees(&self) -> &[RegressionTree<F>];
    fn feature_count(&self) -> usize;
}

impl<F: crate::num::Real> TreeEnsemble<F> for GbmModel<F> {
    fn ensemble_trees(&self) -> &[RegressionTree<F>] {
        &self.trees
    }
    fn feature_count(&self) -> usize {
        self.n_features
    }
}

impl<F: crate::num::Real> TreeEnsemble<F> for ForestModel<F> {
    fn ensemble_trees(&self) -> &[RegressionTree<F>] {
        &self.trees
    }
    fn feature_count(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_features)
    }
}

pub fn feature_fscore<F: crate::num::Real>(model: &impl TreeEnsemble<F>) -> FeatureImportance {
    FeatureImportance::from_trees(model.feature_count(), model.ensemble_trees())
}
