//! Regression scores over paired slices of actual and predicted values.

use crate::error::{Error, Result};
use crate::num::Real;

/// R2, MAE and MSE of one prediction set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple<F> {
    pub r2: F,
    pub mae: F,
    pub mse: F,
}

fn check_lengths<F>(actual: &[F], predicted: &[F], min: usize) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.len() < min {
        return Err(Error::invalid(format!(
            "metric needs at least {min} values, got {}",
            actual.len()
        )));
    }
    Ok(())
}

pub fn r2<F: Real>(actual: &[F], predicted: &[F]) -> Result<F> {
    check_lengths(actual, predicted, 2)?;
    let mean = actual.iter().copied().sum::<F>() / F::from_count(actual.len());
    let ss_tot: F = actual.iter().map(|&y| (y - mean) * (y - mean)).sum();
    if ss_tot == F::zero() {
        return Err(Error::ConstantTarget);
    }
    let ss_res: F = actual
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum();
    Ok(F::one() - ss_res / ss_tot)
}

pub fn mse<F: Real>(actual: &[F], predicted: &[F]) -> Result<F> {
    check_lengths(actual, predicted, 1)?;
    let s: F = actual
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum();
    Ok(s / F::from_count(actual.len()))
}

pub fn mae<F: Real>(actual: &[F], predicted: &[F]) -> Result<F> {
    check_lengths(actual, predicted, 1)?;
    let s: F = actual
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| (y - p).abs())
        .sum();
    Ok(s / F::from_count(actual.len()))
}

/// All three metrics at once; fails when r2 is undefined.
pub fn score<F: Real>(actual: &[F], predicted: &[F]) -> Result<MetricTriple<F>> {
    Ok(MetricTriple {
        r2: r2(actual, predicted)?,
        mae: mae(actual, predicted)?,
        mse: mse(actual, predicted)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2(&[0.0, 2.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(
            r2(&[1.0, 1.0], &[0.0, 1.0]),
            Err(Error::ConstantTarget)
        ));
        assert!(matches!(
            r2(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mse_mae_examples() {
        assert_eq!(mse(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(mse(&[3.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(mae(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mae(&[3.0], &[1.0]).unwrap(), 2.0);
        assert!(mse::<f64>(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        assert_eq!(r2(&[0.0f32, 2.0], &[0.0, 1.0]).unwrap(), 0.5f32);
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0..100.0f64, n),
                prop::collection::vec(-100.0..100.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn mae_squared_bounded_by_mse((y, p) in paired()) {
            let a = mae(&y, &p).unwrap();
            let s = mse(&y, &p).unwrap();
            prop_assert!(a * a <= s * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn mse_matches_loop((y, p) in paired()) {
            let mut acc = 0.0;
            for i in 0..y.len() {
                let r = y[i] - p[i];
                acc += r * r;
            }
            acc /= y.len() as f64;
            prop_assert!((mse(&y, &p).unwrap() - acc).abs() <= 1e-12 * acc.max(1.0));
        }

        #[test]
        fn r2_mean_predictor_and_affine_invariance(
            (y, p) in paired(), scale in 0.1..10.0f64, shift in -50.0..50.0f64
        ) {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            prop_assume!(spread > 1e-6);
            let m = vec![mean; y.len()];
            prop_assert!(r2(&y, &m).unwrap().abs() < 1e-12);
            let base = r2(&y, &p).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
            let ps: Vec<f64> = p.iter().map(|v| scale * v + shift).collect();
            let moved = r2(&ys, &ps).unwrap();
            prop_assert!((base - moved).abs() <= 1e-9 * base.abs().max(1.0));
        }
    }
}
