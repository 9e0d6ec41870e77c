//! Scalar abstraction for the numeric substrate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the matrix, tape and model types are generic over.
///
/// `f64` is the working precision everywhere in this crate (the `f64` aliases
/// at the crate root); `f32` satisfies the bound but is not used by the
/// pipelines.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Display + Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literals and RNG draws.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
