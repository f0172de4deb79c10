//! Scalar abstraction: every numerical routine in this crate is generic over
//! the floating-point type through [`Scalar`], implemented for `f32` and `f64`.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar with the extra pieces the numerics need
/// (log-gamma, conversions from counts).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self;

    /// Lossy conversion used for RNG decisions and I/O.
    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgamma(self)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgammaf(self)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// `n` as a scalar. Counts in this crate stay far below 2^53, so the
/// conversion is exact for `f64`.
#[inline]
pub fn from_count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// `n` as a scalar, for signed intermediates.
#[inline]
pub fn from_int<T: Scalar>(n: i64) -> T {
    T::from_i64(n).expect("integer representable in scalar type")
}
