//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! Models are generic over [`Real`], which is satisfied by `f32` and `f64`.
//! Dataset ingestion and the pipeline work in `f64`; the aliases at the crate
//! root fix the scalar for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{ArrayView2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::linalg::{nalgebra_svd, Svd};

/// Floating point scalar usable by the regressors.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every constant used in this crate is representable.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Thin singular value decomposition of `a`.
    fn thin_svd(a: ArrayView2<Self>) -> Svd<Self>;
}

impl Real for f32 {
    fn thin_svd(a: ArrayView2<Self>) -> Svd<Self> {
        nalgebra_svd(a)
    }
}

impl Real for f64 {
    fn thin_svd(a: ArrayView2<Self>) -> Svd<Self> {
        nalgebra_svd(a)
    }
}
