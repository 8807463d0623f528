//! Numeric bound shared by all coordinate math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar used for point coordinates: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn px(v: u32) -> Self {
        <Self as FromPrimitive>::from_u32(v).expect("u32 representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
