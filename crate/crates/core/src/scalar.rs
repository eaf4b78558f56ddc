use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the numerical core runs on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance used by adaptive quadrature unless overridden.
    const QUAD_TOL: f64;
    /// Relative tolerance at which a power series is truncated.
    const SERIES_TOL: f64;

    /// Converts an `f64` literal. Never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("index fits the scalar type")
    }
}

impl Scalar for f32 {
    const QUAD_TOL: f64 = 1e-5;
    const SERIES_TOL: f64 = 1e-7;
}

impl Scalar for f64 {
    const QUAD_TOL: f64 = 1e-10;
    const SERIES_TOL: f64 = 1e-14;
}
