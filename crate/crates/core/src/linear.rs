//! Least-squares linear regression with an optional L2 (ridge) or L1 (lasso) penalty.
//!
//! All three minimize `(1/m) Σ (w·x + b − y)² + penalty(w)` with the intercept
//! left unpenalized. The intercept is eliminated by centering, so every variant
//! solves for `w` on centered data and recovers `b = ȳ − w·x̄`.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{center, svd};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearVariant {
    Plain,
    Ridge,
    Lasso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<F> {
    pub weights: Array1<F>,
    pub intercept: F,
    pub variant: LinearVariant,
    pub lambda: F,
}

pub const LASSO_TOLERANCE: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

fn check_xy<F>(x: ArrayView2<F>, y: ArrayView1<F>, min_rows: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if x.nrows() < min_rows {
        return Err(Error::invalid(format!(
            "linear fit needs at least {min_rows} rows, got {}",
            x.nrows()
        )));
    }
    Ok(())
}

fn check_lambda<F: Real>(lambda: F) -> Result<()> {
    if !(lambda >= F::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "regularization strength must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Ordinary least squares. Rank-deficient designs yield the minimum-norm weights.
pub fn fit_plain<F: Real>(x: ArrayView2<F>, y: ArrayView1<F>) -> Result<LinearModel<F>> {
    check_xy(x, y, 2)?;
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let weights = svd(xc.view()).filtered_solve(yc.view(), |s| F::one() / s);
    let intercept = y_mean - weights.dot(&x_mean);
    Ok(LinearModel {
        weights,
        intercept,
        variant: LinearVariant::Plain,
        lambda: F::zero(),
    })
}

/// Ridge regression: `w = (XcᵀXc/m + λI)⁻¹ Xcᵀyc/m`, evaluated through the SVD of `Xc`.
pub fn fit_ridge<F: Real>(x: ArrayView2<F>, y: ArrayView1<F>, lambda: F) -> Result<LinearModel<F>> {
    check_xy(x, y, 2)?;
    check_lambda(lambda)?;
    let m = F::from_count(x.nrows());
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let weights = svd(xc.view()).filtered_solve(yc.view(), |s| s / (s * s + m * lambda));
    let intercept = y_mean - weights.dot(&x_mean);
    Ok(LinearModel {
        weights,
        intercept,
        variant: LinearVariant::Ridge,
        lambda,
    })
}

fn soft_threshold<F: Real>(z: F, t: F) -> F {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        F::zero()
    }
}

/// Value of the lasso objective for the given parameters.
pub fn lasso_objective<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    weights: ArrayView1<F>,
    intercept: F,
    lambda: F,
) -> F {
    let m = F::from_count(x.nrows().max(1));
    let pred = x.dot(&weights);
    let loss = pred
        .iter()
        .zip(y)
        .map(|(&p, &t)| (p + intercept - t) * (p + intercept - t))
        .sum::<F>()
        / m;
    loss + lambda * weights.iter().map(|w| w.abs()).sum::<F>()
}

/// Lasso by cyclic coordinate descent with exact soft-threshold updates.
pub fn fit_lasso<F: Real>(x: ArrayView2<F>, y: ArrayView1<F>, lambda: F) -> Result<LinearModel<F>> {
    fit_lasso_traced(x, y, lambda, |_, _, _| {})
}

/// As [`fit_lasso`], calling `on_sweep(sweep, weights, intercept)` after every sweep.
pub fn fit_lasso_traced<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    lambda: F,
    mut on_sweep: impl FnMut(usize, ArrayView1<F>, F),
) -> Result<LinearModel<F>> {
    check_xy(x, y, 1)?;
    check_lambda(lambda)?;
    let (n, d) = x.dim();
    let m = F::from_count(n);
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let col_sq: Vec<F> = xc.columns().into_iter().map(|c| c.dot(&c) / m).collect();
    let half_lambda = lambda / F::lit(2.0);
    let tol = F::lit(LASSO_TOLERANCE);

    let mut w = Array1::<F>::zeros(d);
    let mut residual = yc;
    let mut intercept = y_mean;
    let mut last_change = F::zero();
    for sweep in 1..=LASSO_MAX_SWEEPS {
        let mut max_change = F::zero();
        for j in 0..d {
            if col_sq[j] == F::zero() {
                continue;
            }
            let col = xc.column(j);
            let old = w[j];
            let rho = col.dot(&residual) / m + col_sq[j] * old;
            let new = soft_threshold(rho, half_lambda) / col_sq[j];
            let delta = new - old;
            if delta != F::zero() {
                residual.scaled_add(-delta, &col);
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        intercept = y_mean - w.dot(&x_mean);
        on_sweep(sweep, w.view(), intercept);
        last_change = max_change;
        if max_change < tol {
            return Ok(LinearModel {
                weights: w,
                intercept,
                variant: LinearVariant::Lasso,
                lambda,
            });
        }
    }
    Err(Error::LassoNotConverged {
        sweeps: LASSO_MAX_SWEEPS,
        last_change: last_change.as_f64(),
        last_weights: w.iter().map(|v| v.as_f64()).collect(),
        last_intercept: intercept.as_f64(),
    })
}

/// Smallest λ at which every lasso weight is exactly zero: `2·max|Xcᵀyc|/m`.
pub fn lasso_lambda_max<F: Real>(x: ArrayView2<F>, y: ArrayView1<F>) -> F {
    let m = F::from_count(x.nrows().max(1));
    let (xc, yc, _, _) = center(x, y);
    xc.t()
        .dot(&yc)
        .iter()
        .fold(F::zero(), |acc, v| acc.max(v.abs()))
        * F::lit(2.0)
        / m
}

impl<F: Real> LinearModel<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.ncols(),
            });
        }
        Ok(x.dot(&self.weights).mapv(|v| v + self.intercept))
    }
}

pub fn predict_linear<F: Real>(model: &LinearModel<F>, x: ArrayView2<F>) -> Result<Array1<F>> {
    model.predict(x)
}
