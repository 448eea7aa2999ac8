//! Floating-point scalar abstraction used by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar the numeric core is generic over. Implemented for `f32` and `f64`.
///
/// The conversion helpers exist so schedule and bound formulas can mix
/// integer step counters and `f64` literals with the working precision.
pub trait Real:
    num_traits::Float + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn from_usize(n: usize) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_formula<T: Real>(n: usize) -> T {
        // 1 + 2 + ... + n, exercised at both precisions
        (1..=n).map(T::from_usize).sum()
    }

    #[test]
    fn generic_arithmetic_matches_both_precisions() {
        assert_eq!(sum_formula::<f64>(100), 5050.0);
        assert_eq!(sum_formula::<f32>(100), 5050.0);
        assert_eq!(f64::from_f64(0.5).as_f64(), 0.5);
        assert_eq!(f32::from_f64(0.5), 0.5f32);
    }
}
