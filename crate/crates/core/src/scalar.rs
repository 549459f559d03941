//! Scalar abstraction shared by the geometry, polynomial and moment code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the scalar-generic parts of the crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn sqrt3() -> Self {
        Self::lit(3.0).sqrt()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    /// Hausdorff dimension of the Koch curve, `log 4 / log 3`.
    #[inline]
    fn koch_dim() -> Self {
        Self::lit(4.0).ln() / Self::lit(3.0).ln()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `(cos, sin)` of `k * pi / 6`, built from exact radicals.
pub fn cos_sin_twelfth<T: Real>(k: i32) -> (T, T) {
    let h = T::half();
    let r = T::sqrt3() * h;
    let z = T::zero();
    let o = T::one();
    match k.rem_euclid(12) {
        0 => (o, z),
        1 => (r, h),
        2 => (h, r),
        3 => (z, o),
        4 => (-h, r),
        5 => (-r, h),
        6 => (-o, z),
        7 => (-r, -h),
        8 => (-h, -r),
        9 => (z, -o),
        10 => (h, -r),
        _ => (r, -h),
    }
}
