use desalt_core::dataset::{
    apply_scaler, encode_features, fit_scaler, parse_csv, write_csv, CategoryLabels, CoreSample,
    Dataset, FeatureSchema,
};
use desalt_core::metrics::{mae, mse, r2};
use ndarray::Array2;
use proptest::prelude::*;

const COLORS: [&str; 6] = ["gray", "light-gray", "brown", "red", "green", "mottled"];
const HORIZONS: [&str; 3] = ["h1", "h2", "h3"];

fn sample_strategy() -> impl Strategy<Value = CoreSample> {
    (
        (1000.0f64..2000.0, 0.0f64..50.0, 0.0f64..1.0),
        (0.0f64..40.0, 0.01f64..5000.0, 1.5f64..3.0, 0.005f64..1.0),
        (0usize..6, 0usize..3),
        proptest::option::of(0.0f64..0.9),
        proptest::option::of(0.0f64..20.0),
        proptest::option::of(1.0f64..60.0),
    )
        .prop_map(
            |((top, thick, frac), (phi0, k0, rho, grain), (c, h), salt, dphi, kr)| CoreSample {
                sample_id: String::new(),
                sample_depth: top + thick * frac,
                formation_top_depth: top,
                formation_bottom_depth: top + thick,
                porosity_initial: phi0,
                permeability_initial: k0,
                density_initial: rho,
                grain_size: grain,
                color: COLORS[c].to_string(),
                horizon: HORIZONS[h].to_string(),
                salt_concentration: salt,
                porosity_after: dphi.map(|d| phi0 + d),
                permeability_after: kr.map(|r| k0 * r),
            },
        )
        .prop_filter("depth inside interval", |s| {
            s.formation_top_depth <= s.sample_depth && s.sample_depth <= s.formation_bottom_depth
        })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (
        proptest::collection::vec(sample_strategy(), 1..25),
        any::<[bool; 3]>(),
    )
        .prop_map(|(mut samples, keep)| {
            // Optional columns are either populated for every row or for none.
            for s in samples.iter_mut() {
                if !keep[0] {
                    s.salt_concentration = None;
                } else if s.salt_concentration.is_none() {
                    s.salt_concentration = Some(0.1);
                }
                if !keep[1] {
                    s.porosity_after = None;
                } else if s.porosity_after.is_none() {
                    s.porosity_after = Some(s.porosity_initial);
                }
                if !keep[2] {
                    s.permeability_after = None;
                } else if s.permeability_after.is_none() {
                    s.permeability_after = Some(s.permeability_initial);
                }
            }
            for (i, s) in samples.iter_mut().enumerate() {
                s.sample_id = format!("P{i:03}");
            }
            Dataset::new(samples, "proptest").unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = parse_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.samples, ds.samples);
    }

    #[test]
    fn encoding_is_deterministic_with_one_hot_groups(ds in dataset_strategy(), salt in any::<bool>()) {
        let salt = salt && ds.samples.iter().all(|s| s.salt_concentration.is_some());
        let a = encode_features(&ds, salt).unwrap();
        let b = encode_features(&ds, salt).unwrap();
        prop_assert_eq!(&a.rows, &b.rows);
        prop_assert_eq!(a.rows.nrows(), ds.len());
        let schema = FeatureSchema::new(salt, &CategoryLabels::default());
        prop_assert_eq!(a.rows.ncols(), if salt { 17 } else { 16 });
        for row in a.rows.rows() {
            let colors: f64 = (0..6).map(|j| row[schema.color_offset() + j]).sum();
            let horizons: f64 = (0..3).map(|j| row[schema.horizon_offset() + j]).sum();
            prop_assert_eq!(colors, 1.0);
            prop_assert_eq!(horizons, 1.0);
        }
    }

    #[test]
    fn scaler_standardizes_its_own_rows(
        values in proptest::collection::vec(-1e3f64..1e3, 6..60),
        constant in -5.0f64..5.0,
    ) {
        let n = values.len() / 3;
        let mut m = Array2::<f64>::zeros((n, 4));
        for i in 0..n {
            m[[i, 0]] = values[3 * i];
            m[[i, 1]] = values[3 * i + 1];
            m[[i, 2]] = values[3 * i + 2] * 1e-3;
            m[[i, 3]] = constant;
        }
        let s = fit_scaler(m.view()).unwrap();
        let z = apply_scaler(&s, m.view()).unwrap();
        for j in 0..4 {
            let col = z.column(j);
            let mean = col.sum() / n as f64;
            prop_assert!(mean.abs() < 1e-12, "column {} mean {}", j, mean);
            let raw = m.column(j);
            let raw_mean = raw.sum() / n as f64;
            let spread = raw.iter().map(|v| (v - raw_mean).abs()).fold(0.0, f64::max);
            if spread > 1e-9 * raw_mean.abs().max(1.0) {
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-12, "column {} std {}", j, var.sqrt());
            }
        }
    }

    #[test]
    fn metric_identities(
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        let actual: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let predicted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (a, m) = (mae(&actual, &predicted).unwrap(), mse(&actual, &predicted).unwrap());
        prop_assert!(a * a <= m * (1.0 + 1e-12));

        let mut brute = 0.0;
        for i in 0..actual.len() {
            let r = actual[i] - predicted[i];
            brute += r * r;
        }
        brute /= actual.len() as f64;
        prop_assert!((brute - m).abs() <= 1e-12 * brute.max(1.0));

        let mean = actual.iter().sum::<f64>() / actual.len() as f64;
        let spread = actual.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        prop_assume!(spread > 1e-6);
        let mean_pred = vec![mean; actual.len()];
        prop_assert_eq!(r2(&actual, &mean_pred).unwrap(), 0.0);

        let base = r2(&actual, &predicted).unwrap();
        let ta: Vec<f64> = actual.iter().map(|v| v * scale + shift).collect();
        let tp: Vec<f64> = predicted.iter().map(|v| v * scale + shift).collect();
        let moved = r2(&ta, &tp).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9 * base.abs().max(1.0));
    }
}
