use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::distr::uniform::SampleUniform;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used throughout the simulator (`f32` or `f64`).
///
/// Spectral routines additionally require [`nalgebra::RealField`]; it is kept
/// out of this bound because its method names collide with [`Float`].
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + SampleUniform
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; infallible for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
