//! Scalar abstraction shared by the closed-form model and the estimators.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar used by the model: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite literal fits the scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    /// Relative tolerance appropriate for iterative solvers on this type.
    fn solver_tolerance() -> Self;
}

impl Scalar for f32 {
    fn solver_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn solver_tolerance() -> Self {
        1e-13
    }
}
