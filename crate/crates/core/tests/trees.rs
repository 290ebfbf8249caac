use desalt_core::ensemble::{
    fit_forest, fit_gbm, fit_gbm_traced, fit_tree, ForestParams, GbmParams, Node,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

/// Exhaustive search over every (feature, midpoint) pair, scoring children by
/// directly recomputed sums of squared errors. Ties go to the lowest feature,
/// then the lowest threshold.
fn brute_force_split(x: &Array2<f64>, y: &Array1<f64>) -> Option<(usize, f64)> {
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum::<f64>()
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let parent = sse(&all);
    let tol = 1e-9 * parent.max(1e-300);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = x.column(f).to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, f]] <= t);
            let score = sse(&l) + sse(&r);
            if parent - score <= tol {
                continue;
            }
            let replace = match best {
                None => true,
                Some((s, _, _)) => score < s - tol,
            };
            if replace {
                best = Some((score, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn integer_data() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (2usize..=50, 1usize..=4).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(0i32..6, n * d),
            proptest::collection::vec(-3i32..4, n),
        )
            .prop_map(move |(xs, ys)| {
                (
                    Array2::from_shape_vec((n, d), xs.into_iter().map(f64::from).collect())
                        .unwrap(),
                    Array1::from(ys.into_iter().map(f64::from).collect::<Vec<_>>()),
                )
            })
    })
}

fn continuous_data() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (2usize..=50, 1usize..=4).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(-10.0f64..10.0, n * d),
            proptest::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(move |(xs, ys)| {
                (
                    Array2::from_shape_vec((n, d), xs).unwrap(),
                    Array1::from(ys),
                )
            })
    })
}

fn root_split(x: &Array2<f64>, y: &Array1<f64>) -> Option<(usize, f64)> {
    let tree = fit_tree(x.view(), y.view(), 1, 1).unwrap();
    match tree.nodes[0] {
        Node::Split {
            feature, threshold, ..
        } => Some((feature, threshold)),
        Node::Leaf { .. } => None,
    }
}

fn train_mse(pred: &Array1<f64>, y: &Array1<f64>) -> f64 {
    (pred - y).mapv(|r| r * r).sum() / y.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stump_matches_brute_force_with_ties((x, y) in integer_data()) {
        prop_assert_eq!(root_split(&x, &y), brute_force_split(&x, &y));
    }

    #[test]
    fn stump_matches_brute_force_continuous((x, y) in continuous_data()) {
        prop_assert_eq!(root_split(&x, &y), brute_force_split(&x, &y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deeper_trees_fit_training_data_at_least_as_well((x, y) in continuous_data()) {
        let mut last = f64::INFINITY;
        for depth in 1..=6 {
            let t = fit_tree(x.view(), y.view(), depth, 1).unwrap();
            let e = train_mse(&t.predict(x.view()).unwrap(), &y);
            prop_assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn full_data_boosting_rounds_never_increase_training_loss(
        (x, y) in continuous_data(),
        lr in 0.01f64..=1.0,
        reg in 0.0f64..2.0,
        depth in 1usize..4,
    ) {
        let params = GbmParams {
            n_estimators: 30,
            max_depth: depth,
            learning_rate: lr,
            subsample: 1.0,
            max_features: 1.0,
            reg_lambda: reg,
            min_samples_leaf: 1,
            seed: 7,
        };
        let mut losses = Vec::new();
        fit_gbm_traced(x.view(), y.view(), &params, |_, pred| {
            losses.push(train_mse(&pred.to_owned(), &y));
        })
        .unwrap();
        prop_assert_eq!(losses.len(), 30);
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0));
        }
    }

    #[test]
    fn forest_predictions_stay_within_target_range(
        (x, y) in continuous_data(),
        query in proptest::collection::vec(-20.0f64..20.0, 4),
        seed in any::<u64>(),
    ) {
        let params = ForestParams { n_estimators: 15, max_depth: 4, min_samples_leaf: 1, seed };
        let f = fit_forest(x.view(), y.view(), &params).unwrap();
        let q = Array2::from_shape_fn((1, x.ncols()), |(_, j)| query[j]);
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for p in f.predict(x.view()).unwrap().iter().chain(f.predict(q.view()).unwrap().iter()) {
            prop_assert!(*p >= lo - 1e-12 && *p <= hi + 1e-12);
        }
    }
}

#[test]
fn ensembles_are_reproducible_and_seed_sensitive() {
    let x = Array2::from_shape_fn((40, 3), |(i, j)| {
        ((i * 7 + j * 13) % 17) as f64 + 0.1 * j as f64
    });
    let y = Array1::from_shape_fn(40, |i| (i as f64 * 0.37).sin() * 4.0 + x[[i, 1]]);

    let fp = |seed| ForestParams {
        n_estimators: 20,
        max_depth: 5,
        min_samples_leaf: 1,
        seed,
    };
    let a = fit_forest(x.view(), y.view(), &fp(1)).unwrap();
    assert_eq!(a, fit_forest(x.view(), y.view(), &fp(1)).unwrap());
    assert_ne!(
        a.trees,
        fit_forest(x.view(), y.view(), &fp(2)).unwrap().trees
    );

    let gp = |seed| GbmParams {
        n_estimators: 40,
        max_depth: 3,
        learning_rate: 0.1,
        subsample: 0.7,
        max_features: 0.7,
        reg_lambda: 0.1,
        min_samples_leaf: 1,
        seed,
    };
    let g = fit_gbm(x.view(), y.view(), &gp(5)).unwrap();
    assert_eq!(g, fit_gbm(x.view(), y.view(), &gp(5)).unwrap());
    assert_ne!(g.trees, fit_gbm(x.view(), y.view(), &gp(6)).unwrap().trees);
}
