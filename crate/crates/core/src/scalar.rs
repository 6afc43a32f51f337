//! Scalar abstraction shared by every numerical module.
//!
//! All floating-point kernels are written against [`Real`], so the same code
//! runs in `f32` or `f64`. Exact measure computations in [`crate::hvmodels`]
//! use the looser [`Field`] bound so they also accept rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + Signed + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field used for exact (rational) measure arithmetic.
pub trait Field: Num + Signed + Copy + PartialOrd + Debug {}

impl<T> Field for T where T: Num + Signed + Copy + PartialOrd + Debug {}

/// `x²`
#[inline]
pub fn sq<T: Real>(x: T) -> T {
    x * x
}
