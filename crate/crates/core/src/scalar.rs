//! Scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the whole crate is generic over.
///
/// Implemented by `f32` and `f64`; all tolerances quoted in the crate
/// documentation assume `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Conversion from `f64` literals and intermediate values.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any Scalar")
    }

    /// Conversion from counts.
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("usize converts to any Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
