//! Floating-point scalar abstraction: f32 or f64.

use std::fmt::{Debug, Display};

/// Scalar type the geometry and field math is generic over.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// f64 -> T, rounding to the nearest representable value.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 converts to any Real")
}

/// T -> f64, lossless for f32 and f64.
#[inline]
pub fn as_f64<T: Real>(v: T) -> f64 {
    num_traits::ToPrimitive::to_f64(&v).expect("Real widens to f64")
}
