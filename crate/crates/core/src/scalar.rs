//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a 2-vector.
#[inline]
pub(crate) fn norm2<T: Real>(v: [T; 2]) -> T {
    v[0].hypot(v[1])
}

#[inline]
pub(crate) fn dist2<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    norm2([a[0] - b[0], a[1] - b[1]])
}

/// Euclidean distance between two equally sized vectors.
#[inline]
pub(crate) fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}
