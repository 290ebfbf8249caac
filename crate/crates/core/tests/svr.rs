use desalt_core::svr::{dual_objective, fit_svr, fit_svr_traced, KernelSpec, SvrParams};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximizes `−½βᵀKβ − ε‖β‖₁ + yᵀβ` over `Σβ = 0, |βᵢ| ≤ C` for five points by
/// eliminating `β₄` and searching a 4-D grid that is repeatedly recentred on
/// its best node and shrunk.
fn grid_oracle(k: &Array2<f64>, y: &Array1<f64>, c: f64, eps: f64) -> f64 {
    let objective = |b: &[f64; 5]| {
        let mut quad = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                quad += b[i] * k[[i, j]] * b[j];
            }
        }
        let l1: f64 = b.iter().map(|v| v.abs()).sum();
        let lin: f64 = b.iter().zip(y.iter()).map(|(u, v)| u * v).sum();
        -0.5 * quad - eps * l1 + lin
    };
    const STEPS: i32 = 6;
    let mut center = [0.0f64; 4];
    let mut half = c;
    let mut best = objective(&[0.0; 5]);
    while half > 1e-10 * c {
        let h = half / STEPS as f64;
        let mut best_center = center;
        let mut idx = [-STEPS; 4];
        loop {
            let mut b = [0.0f64; 5];
            let mut inside = true;
            for d in 0..4 {
                b[d] = center[d] + idx[d] as f64 * h;
                inside &= b[d].abs() <= c;
            }
            b[4] = -(b[0] + b[1] + b[2] + b[3]);
            if inside && b[4].abs() <= c {
                let v = objective(&b);
                if v > best {
                    best = v;
                    best_center = [b[0], b[1], b[2], b[3]];
                }
            }
            let mut d = 0;
            while d < 4 {
                idx[d] += 1;
                if idx[d] <= STEPS {
                    break;
                }
                idx[d] = -STEPS;
                d += 1;
            }
            if d == 4 {
                break;
            }
        }
        center = best_center;
        half *= 0.5;
    }
    best
}

fn tiny_problem(seed: u64) -> (Array2<f64>, Array1<f64>, SvrParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((5, 1), |(i, _)| i as f64 + rng.random_range(-0.3..0.3));
    let y = Array1::from_shape_fn(5, |_| rng.random_range(-2.0..2.0));
    let params = SvrParams {
        c: rng.random_range(0.5..5.0),
        gamma: rng.random_range(0.2..1.0),
        epsilon: rng.random_range(0.0..0.3),
        ..SvrParams::default()
    };
    (x, y, params)
}

#[test]
fn dual_objective_matches_dense_grid_oracle() {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (x, y, params) = tiny_problem(seed);
        let model = fit_svr(x.view(), y.view(), &params).unwrap();
        let k = KernelSpec::gaussian(params.gamma).unwrap().matrix(x.view());
        let solver = dual_objective(
            k.view(),
            y.view(),
            model.alpha_star.view(),
            model.alpha.view(),
            params.epsilon,
        );
        let oracle = grid_oracle(&k, &y, params.c, params.epsilon);
        let gap = (solver - oracle).abs();
        assert!(
            gap < 1e-4,
            "problem {seed}: solver {solver} oracle {oracle}"
        );
        worst = worst.max(gap);
    }
    eprintln!("largest dual gap vs grid oracle: {worst:.3e}");
}

fn svr_data() -> impl Strategy<Value = (Array2<f64>, Array1<f64>, SvrParams)> {
    (3usize..25, 1usize..4).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * d),
            proptest::collection::vec(-5.0f64..5.0, n),
            0.1f64..50.0,
            0.05f64..2.0,
            0.0f64..0.5,
        )
            .prop_map(move |(xs, ys, c, gamma, epsilon)| {
                (
                    Array2::from_shape_vec((n, d), xs).unwrap(),
                    Array1::from(ys),
                    SvrParams {
                        c,
                        gamma,
                        epsilon,
                        ..SvrParams::default()
                    },
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_update_is_feasible_and_ascends((x, y, params) in svr_data()) {
        let mut last = f64::NEG_INFINITY;
        let mut steps = 0usize;
        let model = fit_svr_traced(x.view(), y.view(), &params, |step| {
            steps += 1;
            for (&a, &b) in step.alpha.iter().zip(step.alpha_star) {
                assert!((0.0..=params.c).contains(&a) && (0.0..=params.c).contains(&b));
            }
            let balance: f64 = step.alpha_star.iter().zip(step.alpha).map(|(s, a)| s - a).sum();
            assert!(balance.abs() <= 1e-10, "Σ(α′−α) = {balance}");
            assert!(step.dual_objective >= last - 1e-12 * last.abs().max(1.0));
            last = step.dual_objective;
        })
        .unwrap();
        prop_assert_eq!(model.iterations, steps);
        prop_assert!(model.alpha.iter().chain(model.alpha_star.iter()).all(|&v| v >= 0.0 && v <= params.c));
        let balance: f64 = (&model.alpha_star - &model.alpha).sum();
        prop_assert!(balance.abs() <= 1e-10);
    }

    #[test]
    fn prediction_respects_lipschitz_bound(
        (x, y, params) in svr_data(),
        probe in proptest::collection::vec(-3.0f64..3.0, 3),
        delta in proptest::collection::vec(-0.1f64..0.1, 3),
    ) {
        let model = fit_svr(x.view(), y.view(), &params).unwrap();
        let d = x.ncols();
        let p = Array2::from_shape_fn((1, d), |(_, j)| probe[j]);
        let q = Array2::from_shape_fn((1, d), |(_, j)| probe[j] + delta[j]);
        let step = (0..d).map(|j| delta[j] * delta[j]).sum::<f64>().sqrt();
        let change = (model.predict(p.view()).unwrap()[0] - model.predict(q.view()).unwrap()[0]).abs();
        prop_assert!(change <= model.lipschitz_bound() * step + 1e-12);
    }
}
