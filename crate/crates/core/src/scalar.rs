use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the formula-level modules: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Relative tolerance suitable for "sums to one" style checks.
    #[inline]
    fn loose_eps() -> Self {
        Self::epsilon().sqrt()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Standard normal distribution function, evaluated in `f64`.
pub fn norm_cdf<T: Scalar>(z: T) -> T {
    let z = z.as_f64();
    T::lit(0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn norm_pdf<T: Scalar>(z: T) -> T {
    let z = z.as_f64();
    T::lit((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
}
