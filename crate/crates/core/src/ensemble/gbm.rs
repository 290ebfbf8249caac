use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{check_training, RegressionTree, TreeBuilder, TreeParams};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn without replacement for every round.
    pub subsample: f64,
    /// Fraction of features drawn for every tree.
    pub max_features: f64,
    /// L2 shrinkage on leaf values; 0 gives plain boosting.
    pub reg_lambda: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            n_estimators: 1000,
            max_depth: 3,
            learning_rate: 0.01,
            subsample: 1.0,
            max_features: 1.0,
            reg_lambda: 0.0,
            min_samples_leaf: 1,
            seed: 42,
        }
    }
}

/// Squared-loss gradient boosting: `F(x) = F₀ + lr·Σ tree_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel<F> {
    pub initial_prediction: F,
    pub trees: Vec<RegressionTree<F>>,
    pub learning_rate: F,
    pub subsample: f64,
    pub max_features: f64,
    pub reg_lambda: F,
    pub seed: u64,
    pub n_features: usize,
}

/// `⌈fraction·total⌉`, insensitive to representation error in the product.
pub fn fraction_count(fraction: f64, total: usize) -> usize {
    let raw = fraction * total as f64;
    let k = (raw - 1e-9 * raw.abs().max(1.0)).ceil();
    (k.max(0.0) as usize).min(total)
}

fn check_params(p: &GbmParams) -> Result<()> {
    let in_unit = |v: f64| v > 0.0 && v <= 1.0;
    if !in_unit(p.learning_rate) {
        return Err(Error::invalid(format!(
            "learning_rate must lie in (0, 1], got {}",
            p.learning_rate
        )));
    }
    if !in_unit(p.subsample) {
        return Err(Error::invalid(format!(
            "subsample must lie in (0, 1], got {}",
            p.subsample
        )));
    }
    if !in_unit(p.max_features) {
        return Err(Error::invalid(format!(
            "max_features must lie in (0, 1], got {}",
            p.max_features
        )));
    }
    if !(p.reg_lambda >= 0.0) || !p.reg_lambda.is_finite() {
        return Err(Error::invalid(format!(
            "reg_lambda must be non-negative, got {}",
            p.reg_lambda
        )));
    }
    if p.max_depth < 1 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    Ok(())
}

pub fn fit_gbm<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    params: &GbmParams,
) -> Result<GbmModel<F>> {
    fit_gbm_traced(x, y, params, |_, _| {})
}

/// As [`fit_gbm`], calling `on_round(round, training_predictions)` after each tree.
pub fn fit_gbm_traced<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    params: &GbmParams,
    mut on_round: impl FnMut(usize, ArrayView1<F>),
) -> Result<GbmModel<F>> {
    check_training(x, y)?;
    check_params(params)?;
    let (n, d) = x.dim();
    let rows_per_round = fraction_count(params.subsample, n);
    if params.n_estimators > 0 && rows_per_round < 2 {
        return Err(Error::invalid(format!(
            "subsample {} leaves {rows_per_round} rows per round; at least 2 are needed",
            params.subsample
        )));
    }
    let features_per_tree = fraction_count(params.max_features, d).max(1);
    let lr = F::lit(params.learning_rate);
    let reg = F::lit(params.reg_lambda);
    let initial = y.sum() / F::from_count(n);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut fitted = Array1::from_elem(n, initial);
    let mut residual = vec![F::zero(); n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf.max(1),
    };
    for round in 0..params.n_estimators {
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        let mut rows = if rows_per_round == n {
            (0..n).collect::<Vec<_>>()
        } else {
            index::sample(&mut rng, n, rows_per_round).into_vec()
        };
        rows.sort_unstable();
        let mut features = if features_per_tree == d {
            (0..d).collect::<Vec<_>>()
        } else {
            index::sample(&mut rng, d, features_per_tree).into_vec()
        };
        features.sort_unstable();
        let tree = TreeBuilder {
            x,
            y: &residual,
            features: &features,
            params: tree_params,
            leaf_reg: reg,
        }
        .build(rows);
        for (i, row) in x.rows().into_iter().enumerate() {
            fitted[i] = fitted[i] + lr * tree.predict_row(row);
        }
        trees.push(tree);
        on_round(round + 1, fitted.view());
    }
    Ok(GbmModel {
        initial_prediction: initial,
        trees,
        learning_rate: lr,
        subsample: params.subsample,
        max_features: params.max_features,
        reg_lambda: reg,
        seed: params.seed,
        n_features: d,
    })
}

impl<F: Real> GbmModel<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let mut out = Array1::from_elem(x.nrows(), self.initial_prediction);
        for t in &self.trees {
            for (i, row) in x.rows().into_iter().enumerate() {
                out[i] = out[i] + self.learning_rate * t.predict_row(row);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::tree::fit_tree;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};

    #[test]
    fn fraction_count_rounding() {
        assert_eq!(fraction_count(0.7, 100), 70);
        assert_eq!(fraction_count(0.7, 66), 47);
        assert_eq!(fraction_count(0.9, 17), 16);
        assert_eq!(fraction_count(1.0, 17), 17);
        assert_eq!(fraction_count(0.5, 17), 9);
    }

    #[test]
    fn zero_rounds_predicts_mean() {
        let x = array![[0.0f64], [1.0], [2.0], [5.0]];
        let y = array![1.0, 2.0, 3.0, 6.0];
        let p = GbmParams {
            n_estimators: 0,
            ..Default::default()
        };
        let m = fit_gbm(x.view(), y.view(), &p).unwrap();
        assert!(m.predict(x.view()).unwrap().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn single_full_round_reproduces_tree_fit() {
        let x = array![[0.0f64], [1.0], [2.0], [3.0]];
        let y = array![1.0, -3.0, 7.0, 2.0];
        let p = GbmParams {
            n_estimators: 1,
            max_depth: 8,
            learning_rate: 1.0,
            subsample: 1.0,
            max_features: 1.0,
            reg_lambda: 0.0,
            ..Default::default()
        };
        let m = fit_gbm(x.view(), y.view(), &p).unwrap();
        let mean = y.mean().unwrap();
        let resid = y.mapv(|v| v - mean);
        let oracle = fit_tree(x.view(), resid.view(), 8, 1).unwrap();
        let expected = oracle.predict(x.view()).unwrap().mapv(|v| v + mean);
        let got = m.predict(x.view()).unwrap();
        for i in 0..4 {
            assert!((got[i] - expected[i]).abs() < 1e-12);
            assert!((got[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn flavors_agree_at_zero_regularization() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((30, 4), |_| rng.random_range(0.0..1.0f64));
        let y = Array1::from_shape_fn(30, |i| x[[i, 0]] * 2.0 + x[[i, 2]]);
        let plain = GbmParams {
            n_estimators: 40,
            max_depth: 2,
            learning_rate: 0.1,
            subsample: 0.7,
            max_features: 0.75,
            ..Default::default()
        };
        let a = fit_gbm(x.view(), y.view(), &plain).unwrap();
        let b = fit_gbm(
            x.view(),
            y.view(),
            &GbmParams {
                reg_lambda: 0.0,
                ..plain
            },
        )
        .unwrap();
        assert_eq!(a.predict(x.view()).unwrap(), b.predict(x.view()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn full_data_rounds_never_increase_training_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0f64));
        let y = Array1::from_shape_fn(40, |i| (3.0 * x[[i, 0]]).sin() + x[[i, 1]] * x[[i, 2]]);
        for (lr, reg) in [(1.0, 0.0), (0.3, 0.0), (0.1, 2.0)] {
            let p = GbmParams {
                n_estimators: 50,
                max_depth: 3,
                learning_rate: lr,
                reg_lambda: reg,
                ..Default::default()
            };
            let mut prev = y
                .mapv(|v| v - y.mean().unwrap())
                .mapv(|r| r * r)
                .mean()
                .unwrap();
            fit_gbm_traced(x.view(), y.view(), &p, |_, fitted| {
                let mse = (&y - &fitted).mapv(|r| r * r).mean().unwrap();
                assert!(mse <= prev + 1e-12, "{mse} > {prev}");
                prev = mse;
            })
            .unwrap();
        }
    }

    #[test]
    fn regularization_shrinks_leaves() {
        let x = array![[0.0f64], [1.0]];
        let y = array![0.0, 4.0];
        let p = GbmParams {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            reg_lambda: 1.0,
            ..Default::default()
        };
        let m = fit_gbm(x.view(), y.view(), &p).unwrap();
        // residuals -2 and 2, one per leaf: leaf = ±2 / (1 + 1)
        let pred = m.predict(x.view()).unwrap();
        assert_eq!(pred.to_vec(), vec![1.0, 3.0]);
    }

    #[test]
    fn tiny_subsample_rejected() {
        let x = array![[0.0f64], [1.0], [2.0]];
        let y = array![0.0, 1.0, 2.0];
        let p = GbmParams {
            n_estimators: 3,
            subsample: 0.2,
            ..Default::default()
        };
        assert!(fit_gbm(x.view(), y.view(), &p).is_err());
    }

    #[test]
    fn seeded_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_fn((25, 5), |_| rng.random_range(0.0..1.0f64));
        let y = Array1::from_shape_fn(25, |i| x[[i, 1]] - x[[i, 3]]);
        let p = GbmParams {
            n_estimators: 30,
            max_depth: 2,
            subsample: 0.8,
            max_features: 0.6,
            learning_rate: 0.2,
            ..Default::default()
        };
        let a = fit_gbm(x.view(), y.view(), &p).unwrap();
        assert_eq!(a, fit_gbm(x.view(), y.view(), &p).unwrap());
        assert_ne!(
            a,
            fit_gbm(x.view(), y.view(), &GbmParams { seed: 5, ..p }).unwrap()
        );
    }
}
