//! Floating-point scalar abstraction.
//!
//! The math layers (autodiff, network, losses, optimizers, PDE definitions)
//! are generic over [`Scalar`] so they work with `f32` or `f64`. The
//! experiment layer pins everything to `f64`; see the aliases in the crate
//! root.

use num_traits::{Float, FloatConst, NumAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Widening (or identity) conversion to `f64`. Named to avoid clashing
    /// with `num_traits::ToPrimitive::to_f64`.
    fn into_f64(self) -> f64;

    #[inline]
    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self as f64
    }
}
