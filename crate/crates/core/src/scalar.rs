//! Numeric scalar abstraction shared by every scoring routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the engine computes in: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion used for counts and stored decimal values.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to every Scalar")
    }

    /// Ratio of two set cardinalities; an empty denominator yields zero.
    fn ratio(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Self::zero()
        } else {
            Self::of(numerator as f64) / Self::of(denominator as f64)
        }
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
