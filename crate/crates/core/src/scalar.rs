//! Scalar abstraction: every numerical routine in this crate is generic over
//! the floating-point type through this trait.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy + Default {}

impl<T: RealField + FromPrimitive + ToPrimitive + Copy + Default> Scalar for T {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

/// Lossy view of a scalar as `f64`, used for reporting.
#[inline]
pub fn approx_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
