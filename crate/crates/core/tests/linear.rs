use desalt_core::linear::{
    fit_lasso, fit_lasso_traced, fit_plain, fit_ridge, lasso_lambda_max, lasso_objective,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn design(n: usize, d: usize) -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (
        proptest::collection::vec(-3.0f64..3.0, n * d),
        proptest::collection::vec(-2.0f64..2.0, d),
        proptest::collection::vec(-0.5f64..0.5, n),
        -5.0f64..5.0,
    )
        .prop_map(move |(xs, w, noise, b)| {
            let x = Array2::from_shape_vec((n, d), xs).unwrap();
            let w = Array1::from(w);
            let y = x.dot(&w) + Array1::from(noise) + b;
            (x, y)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plain_residual_is_orthogonal_to_design((x, y) in design(25, 4)) {
        let m = fit_plain(x.view(), y.view()).unwrap();
        let resid = &y - &(x.dot(&m.weights) + m.intercept);
        let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max) * x.nrows() as f64;
        prop_assert!(resid.sum().abs() <= 1e-8 * scale);
        for col in x.columns() {
            let cs = col.iter().map(|v| v.abs()).fold(1.0, f64::max);
            prop_assert!(col.dot(&resid).abs() <= 1e-8 * scale * cs);
        }
    }

    #[test]
    fn ridge_norm_shrinks_with_lambda((x, y) in design(20, 5), l1 in 0.0f64..5.0, dl in 0.0f64..5.0) {
        let a = fit_ridge(x.view(), y.view(), l1).unwrap();
        let b = fit_ridge(x.view(), y.view(), l1 + dl).unwrap();
        let (na, nb) = (a.weights.dot(&a.weights).sqrt(), b.weights.dot(&b.weights).sqrt());
        prop_assert!(na >= nb - 1e-12 * na.max(1.0));
    }

    #[test]
    fn lasso_sweeps_never_increase_objective((x, y) in design(20, 5), frac in 0.0f64..1.2) {
        let lambda = frac * lasso_lambda_max(x.view(), y.view());
        let mut history = Vec::new();
        let m = fit_lasso_traced(x.view(), y.view(), lambda, |_, w, b| {
            history.push(lasso_objective(x.view(), y.view(), w, b, lambda));
        })
        .unwrap();
        for pair in history.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0));
        }
        let plain = fit_plain(x.view(), y.view()).unwrap();
        let at_plain = lasso_objective(x.view(), y.view(), plain.weights.view(), plain.intercept, lambda);
        let at_lasso = lasso_objective(x.view(), y.view(), m.weights.view(), m.intercept, lambda);
        prop_assert!(at_lasso <= at_plain + 1e-9 * at_plain.max(1.0));
    }

    #[test]
    fn lasso_limits((x, y) in design(30, 4), over in 1.0f64..3.0) {
        let zero = fit_lasso(x.view(), y.view(), 0.0).unwrap();
        let plain = fit_plain(x.view(), y.view()).unwrap();
        for (a, b) in zero.weights.iter().zip(&plain.weights) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
        prop_assert!((zero.intercept - plain.intercept).abs() < 1e-6);

        let lmax = lasso_lambda_max(x.view(), y.view());
        let shrunk = fit_lasso(x.view(), y.view(), lmax * over).unwrap();
        prop_assert!(shrunk.weights.iter().all(|&w| w == 0.0));
        let mean = y.sum() / y.len() as f64;
        prop_assert!((shrunk.intercept - mean).abs() < 1e-9 * mean.abs().max(1.0));
    }

    #[test]
    fn fits_are_deterministic((x, y) in design(15, 3), lambda in 0.0f64..2.0) {
        prop_assert_eq!(fit_plain(x.view(), y.view()).unwrap(), fit_plain(x.view(), y.view()).unwrap());
        prop_assert_eq!(
            fit_ridge(x.view(), y.view(), lambda).unwrap(),
            fit_ridge(x.view(), y.view(), lambda).unwrap()
        );
        prop_assert_eq!(
            fit_lasso(x.view(), y.view(), lambda).unwrap(),
            fit_lasso(x.view(), y.view(), lambda).unwrap()
        );
    }
}

#[test]
fn rank_deficient_design_gets_minimum_norm_weights() {
    // The third column duplicates the first, so the two share the coefficient.
    let x: Array2<f64> = ndarray::array![
        [1.0, 2.0, 1.0],
        [2.0, 0.0, 2.0],
        [3.0, 1.0, 3.0],
        [4.0, 5.0, 4.0]
    ];
    let y = x.dot(&ndarray::array![2.0, -1.0, 0.0]) + 3.0;
    let m = fit_plain(x.view(), y.view()).unwrap();
    assert!((m.weights[0] - 1.0).abs() < 1e-9);
    assert!((m.weights[2] - 1.0).abs() < 1e-9);
    assert!((m.weights[1] + 1.0).abs() < 1e-9);
    assert!((m.intercept - 3.0).abs() < 1e-9);
}
