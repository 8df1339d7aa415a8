//! Scalar abstraction shared by every numeric module.
//!
//! All model math is written against [`Scalar`], which is implemented for
//! `f32` and `f64`. Randomness is always drawn in `f64` and narrowed, so a
//! given seed produces the same realization regardless of precision.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive};

/// Floating point scalar usable by the simulator: `f32` or `f64`.
///
/// Both `num_traits::Float` and `nalgebra::RealField` are required; generic
/// code calls methods with the trait path (`Float::sqrt(x)`) because the two
/// traits share method names.
pub trait Scalar:
    Float + FromPrimitive + RealField + Copy + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or sample.
    fn of(x: f64) -> Self;

    /// Widening conversion used for reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Euclidean norm.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    Float::sqrt(v.iter().fold(T::zero(), |acc, &x| acc + x * x))
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn sum<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x)
}

pub fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|&x| Float::is_finite(x))
}

/// `‖a − b‖` without allocating.
pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    Float::sqrt(
        a.iter()
            .zip(b)
            .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)),
    )
}
