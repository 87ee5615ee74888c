//! Scalar abstraction shared by jets, geometry and fitting.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the toolkit computes in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the type cannot represent it at all.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal must convert to scalar")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count must convert to scalar")
    }

    /// Lossy view used for error payloads and reports.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
