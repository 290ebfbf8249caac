//! Dense least-squares kernels: spectral solves on top of a thin SVD.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::num::Real;

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<F> {
    pub u: Array2<F>,
    pub singular_values: Array1<F>,
    pub v: Array2<F>,
}

/// Thin SVD of `a`, computed by nalgebra and converted to ndarray storage.
pub fn svd<F: Real>(a: ArrayView2<F>) -> Svd<F> {
    F::thin_svd(a)
}

/// Bridge used by the `Real` impls. Kept free of `Float` bounds so nalgebra's
/// `RealField` methods never collide with num-traits ones.
pub(crate) fn nalgebra_svd<T>(a: ArrayView2<T>) -> Svd<T>
where
    T: nalgebra::RealField + Copy,
{
    let (m, n) = a.dim();
    let k = m.min(n);
    let mat = nalgebra::DMatrix::<T>::from_fn(m, n, |i, j| a[[i, j]]);
    let dec = mat.svd(true, true);
    let u = dec.u.expect("left singular vectors requested");
    let v_t = dec.v_t.expect("right singular vectors requested");
    Svd {
        u: Array2::from_shape_fn((m, k), |(i, j)| u[(i, j)]),
        singular_values: Array1::from_shape_fn(k, |j| dec.singular_values[j]),
        v: Array2::from_shape_fn((n, k), |(i, j)| v_t[(j, i)]),
    }
}

impl<F: Real> Svd<F> {
    /// Singular values below this are treated as zero.
    pub fn rank_cutoff(&self) -> F {
        let smax = self.singular_values.iter().copied().fold(F::zero(), F::max);
        let (m, n) = (self.u.nrows(), self.v.nrows());
        smax * F::epsilon() * F::from_count(m.max(n).max(1))
    }

    /// Solves `min ‖A x − b‖` with spectral filter `φ(σ)` replacing `1/σ`.
    pub fn filtered_solve(&self, b: ArrayView1<F>, filter: impl Fn(F) -> F) -> Array1<F> {
        let cutoff = self.rank_cutoff();
        let mut x = Array1::<F>::zeros(self.v.nrows());
        for (j, &sigma) in self.singular_values.iter().enumerate() {
            if sigma <= cutoff || sigma == F::zero() {
                continue;
            }
            let coef = self.u.column(j).dot(&b) * filter(sigma);
            x.scaled_add(coef, &self.v.column(j));
        }
        x
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn lstsq<F: Real>(a: ArrayView2<F>, b: ArrayView1<F>) -> Array1<F> {
    svd(a).filtered_solve(b, |s| F::one() / s)
}

/// Column means of `x` and the mean of `y`, with the centered copies.
pub fn center<F: Real>(x: ArrayView2<F>, y: ArrayView1<F>) -> (Array2<F>, Array1<F>, Array1<F>, F) {
    let n = F::from_count(x.nrows().max(1));
    let x_mean = x.sum_axis(Axis(0)).mapv(|s| s / n);
    let y_mean = y.sum() / n;
    let xc = &x - &x_mean.view().insert_axis(Axis(0));
    let yc = y.mapv(|v| v - y_mean);
    (xc, yc, x_mean, y_mean)
}
