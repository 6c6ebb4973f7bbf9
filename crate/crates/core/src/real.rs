//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the physics is written against (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Lossy for `f32`, exact for `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon relative tolerance used by series branches.
    #[inline]
    fn eps() -> Self {
        Self::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `sin(x)/x` with the removable singularity filled in.
#[inline]
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// `x·coth(x)`, finite at the origin.
#[inline]
pub fn x_coth_x<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::lit(1e-4) {
        let x2 = x * x;
        T::one() + x2 / T::lit(3.0) - x2 * x2 / T::lit(45.0)
    } else if ax > T::lit(40.0) {
        ax
    } else {
        x / x.tanh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_matches_direct_form_across_branch() {
        for &x in &[1e-6f64, 5e-5, 1e-4, 2e-4, 0.3, 2.0] {
            assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        }
        assert_eq!(sinc(0.0f64), 1.0);
    }

    #[test]
    fn x_coth_x_limits() {
        assert_eq!(x_coth_x(0.0f64), 1.0);
        assert!((x_coth_x(1e-5f64) - 1e-5 / 1e-5f64.tanh()).abs() < 1e-14);
        assert!((x_coth_x(1.0f64) - 1.0 / 1.0f64.tanh()).abs() < 1e-15);
        assert_eq!(x_coth_x(100.0f64), 100.0);
        assert!((x_coth_x(0.5f32) - 0.5 / 0.5f32.tanh()).abs() < 1e-6);
    }
}
