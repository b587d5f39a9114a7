use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the geometry and field math is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal or file value.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Linear interpolation that is exact at `t == 0`, at `t == 1` and when `a == b`.
///
/// Same contract as C++20 `std::lerp` for finite inputs.
#[inline]
pub fn lerp_exact<T: Scalar>(a: T, b: T, t: T) -> T {
    if t == T::one() {
        b
    } else {
        a + t * (b - a)
    }
}
