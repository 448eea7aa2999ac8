//! Step-size laws `η_t`, the regularization weights `γ_t = 1/η_t − 1/η_{t−1}`
//! they imply, the per-step smoothness `L_t = L + γ_t`, and the AdaGrad-norm
//! accumulator for the adaptive variant.

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::numeric::sqrt_gap;
use crate::scalar::Real;

/// Step-size schedule. The first three variants are deterministic functions
/// of `t`; `AdaGradNorm` depends on the observed gradients through
/// [`AdaGradState`].
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleParams<T> {
    /// `η_t = η`.
    Constant { eta: T },
    /// `η_t = 1/(L(1+ρ)(1+ρ+α√t))` with `α = min{σ/(L(1+ρ)), 1}`, the
    /// schedule tuned for oracles satisfying `E‖ξ‖² ≤ ρ‖∇f‖² + σ²`.
    /// `σ = 0` gives `α = 0` and a constant schedule.
    Sgc { lipschitz: T, rho: T, sigma: T },
    /// `η_t = 1/(L + σ√t)`, the schedule used for high-probability
    /// guarantees under bounded noise.
    HighProb { lipschitz: T, sigma: T },
    /// `η_t = η/√S_t` with `S_t = γ_reg + Σ_{i≤t} ‖g_i‖²`.
    AdaGradNorm { eta: T, gamma_reg: T },
}

impl<T: Real> ScheduleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite and > 0")))
            }
        };
        let nonneg = |name: &str, v: T| {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite and >= 0")))
            }
        };
        match self {
            ScheduleParams::Constant { eta } => pos("eta", *eta),
            ScheduleParams::Sgc { lipschitz, rho, sigma } => {
                pos("lipschitz", *lipschitz)?;
                nonneg("rho", *rho)?;
                nonneg("sigma", *sigma)
            }
            ScheduleParams::HighProb { lipschitz, sigma } => {
                pos("lipschitz", *lipschitz)?;
                nonneg("sigma", *sigma)
            }
            ScheduleParams::AdaGradNorm { eta, gamma_reg } => {
                pos("eta", *eta)?;
                nonneg("gamma_reg", *gamma_reg)
            }
        }
    }

    /// `α = min{σ/(L(1+ρ)), 1}` for the strong-growth schedule; `None` for
    /// the other variants.
    pub fn alpha(&self) -> Option<T> {
        match self {
            ScheduleParams::Sgc { lipschitz, rho, sigma } => {
                Some((*sigma / (*lipschitz * (T::one() + *rho))).min(T::one()))
            }
            _ => None,
        }
    }

    /// Whether `η_t` depends on the observed gradients.
    pub fn is_state_dependent(&self) -> bool {
        matches!(self, ScheduleParams::AdaGradNorm { .. })
    }

    fn need_deterministic(&self) -> Result<()> {
        if self.is_state_dependent() {
            Err(Error::MissingState(
                "adaptive schedule derives eta from the gradient accumulator; use AdaGradState"
                    .into(),
            ))
        } else {
            Ok(())
        }
    }

    /// `1/η_t`, evaluated directly from the defining formula (no reciprocal
    /// round trip).
    pub fn inv_eta(&self, t: usize) -> Result<T> {
        self.need_deterministic()?;
        debug_assert!(t >= 1);
        let sqrt_t = T::from_usize(t).sqrt();
        Ok(match self {
            ScheduleParams::Constant { eta } => T::one() / *eta,
            ScheduleParams::Sgc { lipschitz, rho, sigma: _ } => {
                let one_rho = T::one() + *rho;
                let alpha = self.alpha().expect("variant checked");
                *lipschitz * one_rho * (one_rho + alpha * sqrt_t)
            }
            ScheduleParams::HighProb { lipschitz, sigma } => *lipschitz + *sigma * sqrt_t,
            ScheduleParams::AdaGradNorm { .. } => unreachable!(),
        })
    }

    /// `η_t` for the deterministic variants (`t ≥ 1`).
    pub fn eta(&self, t: usize) -> Result<T> {
        Ok(T::one() / self.inv_eta(t)?)
    }

    /// `γ_t = 1/η_t − 1/η_{t−1}` with the convention `η_0 = η_1`, so
    /// `γ_1 = 0`. Evaluated in closed form — the √t-driven variants reduce
    /// to a multiple of `√t − √(t−1)`, which is computed without
    /// cancellation.
    pub fn gamma(&self, t: usize) -> Result<T> {
        self.need_deterministic()?;
        debug_assert!(t >= 1);
        if t == 1 {
            return Ok(T::zero());
        }
        Ok(match self {
            ScheduleParams::Constant { .. } => T::zero(),
            ScheduleParams::Sgc { lipschitz, rho, sigma: _ } => {
                let one_rho = T::one() + *rho;
                let alpha = self.alpha().expect("variant checked");
                *lipschitz * one_rho * alpha * T::from_f64(sqrt_gap(t))
            }
            ScheduleParams::HighProb { sigma, .. } => *sigma * T::from_f64(sqrt_gap(t)),
            ScheduleParams::AdaGradNorm { .. } => unreachable!(),
        })
    }

    /// Smoothness of the regularized per-step objective:
    /// `L_t = L + γ_t`.
    pub fn smoothness_t(&self, lipschitz: T, t: usize) -> Result<T> {
        Ok(lipschitz + self.gamma(t)?)
    }
}

/// Running AdaGrad-norm accumulator `S = γ_reg + Σ ‖g_i‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaGradState<T> {
    s: T,
    steps: usize,
}

impl<T: Real> AdaGradState<T> {
    pub fn new(gamma_reg: T) -> Self {
        AdaGradState {
            s: gamma_reg,
            steps: 0,
        }
    }

    /// Folds one observed gradient into the accumulator.
    pub fn update(&mut self, g: &[T]) {
        self.s = self.s + norm_sq(g);
        self.steps += 1;
    }

    /// `η = base/√S`. Errs while `S = 0` (zero regularization and no
    /// nonzero gradient seen yet); the optimizer skips such steps.
    pub fn eta(&self, base_eta: T) -> Result<T> {
        if self.s > T::zero() {
            Ok(base_eta / self.s.sqrt())
        } else {
            Err(Error::MissingState(
                "AdaGrad accumulator is zero; the step must be skipped".into(),
            ))
        }
    }

    pub fn sum(&self) -> T {
        self.s
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strong_growth_schedule_examples() {
        let s = ScheduleParams::Sgc { lipschitz: 1.0f64, rho: 0.0, sigma: 2.0 };
        assert_eq!(s.alpha(), Some(1.0));
        assert!((s.eta(4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.gamma(1).unwrap(), 0.0);

        // σ = 0 collapses to a constant schedule.
        let s = ScheduleParams::Sgc { lipschitz: 2.0f64, rho: 1.0, sigma: 0.0 };
        assert_eq!(s.alpha(), Some(0.0));
        for t in [1usize, 2, 10, 1_000] {
            assert_eq!(s.eta(t).unwrap(), 1.0 / 8.0);
            assert_eq!(s.gamma(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn high_prob_schedule_examples() {
        let s = ScheduleParams::HighProb { lipschitz: 2.0f64, sigma: 3.0 };
        assert!((s.eta(9).unwrap() - 1.0 / 11.0).abs() < 1e-16);
        let s = ScheduleParams::HighProb { lipschitz: 1.0f64, sigma: 1.0 };
        assert!((s.gamma(2).unwrap() - (2.0f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((s.smoothness_t(1.0, 2).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_schedule_has_zero_gamma() {
        let s = ScheduleParams::Constant { eta: 0.25f64 };
        for t in [1usize, 2, 77] {
            assert_eq!(s.eta(t).unwrap(), 0.25);
            assert_eq!(s.gamma(t).unwrap(), 0.0);
            assert_eq!(s.smoothness_t(3.0, t).unwrap(), 3.0);
        }
    }

    #[test]
    fn regularized_smoothness_hand_value() {
        let s = ScheduleParams::Sgc { lipschitz: 1.0f64, rho: 0.0, sigma: 1.0 };
        let lt = s.smoothness_t(1.0, 100).unwrap();
        assert!((lt - (1.0 + (10.0 - 99.0f64.sqrt()))).abs() < 1e-12);
        assert!((lt - 1.0501).abs() < 1e-4);
    }

    #[test]
    fn adaptive_variant_requires_state() {
        let s = ScheduleParams::AdaGradNorm { eta: 1.0f64, gamma_reg: 0.0 };
        assert!(matches!(s.eta(1), Err(Error::MissingState(_))));
        assert!(matches!(s.gamma(1), Err(Error::MissingState(_))));
        assert!(s.is_state_dependent());
    }

    #[test]
    fn adagrad_accumulator_examples() {
        let mut st = AdaGradState::new(0.0f64);
        st.update(&[3.0, 4.0]);
        assert_eq!(st.sum(), 25.0);
        assert_eq!(st.eta(1.0).unwrap(), 0.2);

        st.update(&[0.0, 0.0]);
        assert_eq!(st.sum(), 25.0);
        assert_eq!(st.steps(), 2);

        let mut st = AdaGradState::new(1.0f64);
        st.update(&[1.0, 0.0]);
        st.update(&[0.0, 1.0]);
        assert_eq!(st.sum(), 3.0);

        let st = AdaGradState::new(1.0f64);
        assert_eq!(st.eta(2.0).unwrap(), 2.0);

        let st = AdaGradState::new(0.0f64);
        assert!(matches!(st.eta(1.0), Err(Error::MissingState(_))));
    }

    #[test]
    fn adagrad_eta_non_increasing_along_trajectory() {
        let mut st = AdaGradState::new(0.5f64);
        let mut last = st.eta(1.0).unwrap();
        for k in 0..100 {
            st.update(&[(k as f64 * 0.37).sin(), 0.1]);
            let e = st.eta(1.0).unwrap();
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn high_prob_step_times_smoothness_at_most_one() {
        for &l in &[0.5f64, 1.0, 10.0] {
            for &sigma in &[0.0f64, 1.0, 10.0] {
                let s = ScheduleParams::HighProb { lipschitz: l, sigma };
                for &t in &[1usize, 2, 3, 10, 100, 10_000, 1_000_000] {
                    let prod = s.eta(t).unwrap() * s.smoothness_t(l, t).unwrap();
                    assert!(prod <= 1.0 + 1e-15, "L={l} sigma={sigma} t={t}: {prod}");
                }
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ScheduleParams::Constant { eta: 0.0f64 }.validate().is_err());
        assert!(ScheduleParams::Constant { eta: -1.0f64 }.validate().is_err());
        assert!(ScheduleParams::Sgc { lipschitz: 0.0f64, rho: 0.0, sigma: 1.0 }.validate().is_err());
        assert!(ScheduleParams::Sgc { lipschitz: 1.0f64, rho: -0.5, sigma: 1.0 }.validate().is_err());
        assert!(ScheduleParams::HighProb { lipschitz: 1.0f64, sigma: -1.0 }.validate().is_err());
        assert!(ScheduleParams::AdaGradNorm { eta: 1.0f64, gamma_reg: -0.1 }.validate().is_err());
        assert!(ScheduleParams::AdaGradNorm { eta: 1.0f64, gamma_reg: 0.0 }.validate().is_ok());
    }

    proptest! {
        #[test]
        fn eta_positive_nonincreasing_gamma_nonneg(
            l in 0.1f64..10.0,
            rho in 0.0f64..5.0,
            sigma in 0.0f64..10.0,
            eta in 0.01f64..10.0,
            t in 1usize..1_000_000,
        ) {
            let variants: Vec<ScheduleParams<f64>> = vec![
                ScheduleParams::Constant { eta },
                ScheduleParams::Sgc { lipschitz: l, rho, sigma },
                ScheduleParams::HighProb { lipschitz: l, sigma },
            ];
            for s in &variants {
                let e_t = s.eta(t).unwrap();
                let e_next = s.eta(t + 1).unwrap();
                prop_assert!(e_t > 0.0);
                prop_assert!(e_next <= e_t);
                prop_assert!(s.gamma(t).unwrap() >= 0.0);
                // γ_t agrees with the defining difference of inverse steps.
                let diff = s.inv_eta(t).unwrap()
                    - if t > 1 { s.inv_eta(t - 1).unwrap() } else { s.inv_eta(1).unwrap() };
                let scale = s.inv_eta(t).unwrap().abs().max(1.0);
                prop_assert!((s.gamma(t).unwrap() - diff).abs() <= 1e-9 * scale);
            }
        }
    }
}
