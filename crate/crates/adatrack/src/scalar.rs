//! Scalar abstraction: every numeric routine in this crate is generic over
//! the floating-point type.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Cast a literal. Panics only on non-representable values, which cannot
    /// happen for the finite constants used in this crate.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant representable in scalar type")
    }

    #[inline]
    fn of(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
