//! Compensated accumulation and cancellation-free expression helpers.
//!
//! The schedule inequality verifiers compare quantities that agree to many
//! leading digits (for example `√t − √(t−1)` against its own forward
//! difference), so naive evaluation loses the margin long before `t = 10⁶`.
//! Everything here is exact algebra rearranged to avoid the cancellation.

use crate::scalar::Real;

/// Neumaier's variant of Kahan summation: the compensation also captures the
/// case where the addend is larger than the running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> NeumaierSum<T> {
    pub fn new() -> Self {
        NeumaierSum {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum<T: Real>(values: &[T]) -> T {
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// `√t − √(t−1)` for `t ≥ 1`, computed as `1/(√t + √(t−1))` so no digits
/// cancel.
#[inline]
pub fn sqrt_gap(t: usize) -> f64 {
    debug_assert!(t >= 1);
    let a = (t as f64).sqrt();
    let b = ((t - 1) as f64).sqrt();
    1.0 / (a + b)
}

/// Forward difference of the square-root gap,
/// `(√(t−1) − √(t−2)) − (√t − √(t−1))` for `t ≥ 2`.
///
/// Both gaps shrink like `1/(2√t)` while their difference shrinks like
/// `1/(4t^{3/2})`; subtracting the two gaps directly would leave almost no
/// correct digits at large `t`. Rationalizing twice gives
/// `2 / ((√t + √(t−2)) (√(t−1) + √(t−2)) (√t + √(t−1)))`, which is exact
/// algebra and keeps full relative precision.
#[inline]
pub fn sqrt_gap_decrement(t: usize) -> f64 {
    debug_assert!(t >= 2);
    let st = (t as f64).sqrt();
    let sm1 = ((t - 1) as f64).sqrt();
    let sm2 = ((t - 2) as f64).sqrt();
    2.0 / ((st + sm2) * (sm1 + sm2) * (st + sm1))
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
/// Reference oracle for analytic gradients; O(h²) accurate.
pub fn central_gradient<T: Real, F: Fn(&[T]) -> T>(f: F, x: &[T], h: T) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    let two = T::from_f64(2.0);
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        out.push((fp - fm) / (two * h));
    }
    out
}
