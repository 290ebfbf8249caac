use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{check_training, RegressionTree, TreeBuilder, TreeParams};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 8,
            min_samples_leaf: 1,
            seed: 42,
        }
    }
}

/// Bagged ensemble of regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel<F> {
    pub trees: Vec<RegressionTree<F>>,
    pub n_estimators: usize,
    pub seed: u64,
}

/// Random stream owned by tree `index`; independent of how many trees are trained.
pub fn tree_stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit_forest<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    params: &ForestParams,
) -> Result<ForestModel<F>> {
    check_training(x, y)?;
    if params.n_estimators < 1 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    if params.max_depth < 1 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    let n = x.nrows();
    let y = y.to_vec();
    let features: Vec<usize> = (0..x.ncols()).collect();
    let builder = TreeBuilder {
        x,
        y: &y,
        features: &features,
        params: TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf.max(1),
        },
        leaf_reg: F::zero(),
    };
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_stream(params.seed, i);
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            rows.sort_unstable();
            builder.build(rows)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_estimators: params.n_estimators,
        seed: params.seed,
    })
}

impl<F: Real> ForestModel<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        let mut acc = Array1::<F>::zeros(x.nrows());
        for t in &self.trees {
            acc = acc + t.predict(x)?;
        }
        let k = F::from_count(self.trees.len());
        Ok(acc.mapv(|v| v / k))
    }
}
