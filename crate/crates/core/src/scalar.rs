//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the solvers (`f32` or `f64`).
///
/// Arithmetic and transcendental functions come from [`RealField`];
/// conversions and constants come from `num-traits`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + FloatConst + LowerExp + Debug + Send + Sync {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    /// Lossy conversion to `f64`, used for reporting and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }

    #[inline]
    fn inf() -> Self {
        Self::lit(f64::INFINITY)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for a complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub(crate) fn modulus<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// `e^{iφ}`.
#[inline]
pub(crate) fn phase<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}
