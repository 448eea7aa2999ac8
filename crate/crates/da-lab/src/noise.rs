//! Stochastic gradient oracles and empirical checkers for the assumptions
//! the convergence guarantees rely on: unbiasedness, the strong growth
//! bound `E‖ξ‖² ≤ ρ‖∇f‖² + σ²`, and bounded-support noise.

use rand::{Rng, RngExt};
use rand_distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::objectives::{Objective, Problem};
use crate::scalar::Real;

/// How the stochastic gradient `g = ∇f(x) + ξ` is produced.
///
/// Draws are deterministic given the generator state. Where several random
/// quantities are needed, the order is fixed: direction vector first, then
/// scalar (sign or radius).
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel<T> {
    /// `ξ = 0`.
    Exact,
    /// `ξ = σ·z` with `z` a standard normal vector.
    AdditiveGaussian { sigma: T },
    /// `ξ = ε·(√(ρ/2)·‖∇f(x)‖ + σ/√2)·u` with `ε` a Rademacher sign and `u`
    /// uniform on the unit sphere. `‖ξ‖` is a deterministic function of `x`;
    /// `(a+b)² ≤ 2a² + 2b²` gives `E‖ξ‖² ≤ ρ‖∇f‖² + σ²`.
    StrongGrowth { rho: T, sigma: T },
    /// `ξ = r·u` with `r` uniform on `[0, σ]` and `u` uniform on the unit
    /// sphere, so `‖ξ‖ ≤ σ` on every draw (sub-Gaussian with parameter σ).
    BoundedSphere { sigma: T },
    /// Mean gradient of `batch_size` rows of a least-squares problem,
    /// sampled uniformly with replacement. Only valid on least squares.
    MiniBatch { batch_size: usize },
}

impl<T: Real> NoiseModel<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: T| {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite and >= 0")))
            }
        };
        match self {
            NoiseModel::Exact => Ok(()),
            NoiseModel::AdditiveGaussian { sigma } => nonneg("sigma", *sigma),
            NoiseModel::StrongGrowth { rho, sigma } => {
                nonneg("rho", *rho)?;
                nonneg("sigma", *sigma)
            }
            NoiseModel::BoundedSphere { sigma } => nonneg("sigma", *sigma),
            NoiseModel::MiniBatch { batch_size } => {
                if *batch_size >= 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("batch_size must be >= 1".into()))
                }
            }
        }
    }

    /// `(ρ, σ)` for which this oracle provably satisfies
    /// `E[‖ξ‖² | x] ≤ ρ‖∇f(x)‖² + σ²`:
    ///
    /// - `Exact` → (0, 0);
    /// - `AdditiveGaussian(σ)` → (0, σ√d) since `E‖ξ‖² = σ²d`;
    /// - `StrongGrowth(ρ, σ)` → (ρ, σ) by construction;
    /// - `BoundedSphere(σ)` → (0, σ) from the support bound;
    /// - `MiniBatch(b)` → certified constants from the problem data.
    pub fn declared_growth_params(&self, problem: &Problem<T>) -> Result<(T, T)> {
        match self {
            NoiseModel::Exact => Ok((T::zero(), T::zero())),
            NoiseModel::AdditiveGaussian { sigma } => {
                Ok((T::zero(), *sigma * T::from_usize(problem.dim()).sqrt()))
            }
            NoiseModel::StrongGrowth { rho, sigma } => Ok((*rho, *sigma)),
            NoiseModel::BoundedSphere { sigma } => Ok((T::zero(), *sigma)),
            NoiseModel::MiniBatch { batch_size } => {
                let ls = problem.as_least_squares().ok_or_else(|| {
                    Error::Config("mini-batch noise requires a least-squares problem".into())
                })?;
                ls.minibatch_growth_params(*batch_size)
            }
        }
    }
}

/// One stochastic gradient with its decomposition `g = ∇f(x) + ξ`.
#[derive(Clone, Debug)]
pub struct GradientSample<T> {
    pub g: Vec<T>,
    pub grad_true: Vec<T>,
    pub xi: Vec<T>,
}

fn unit_sphere<T: Real, R: Rng>(d: usize, rng: &mut R) -> Vec<T> {
    let normal = rand_distr::StandardNormal;
    loop {
        let z: Vec<T> = (0..d)
            .map(|_| T::from_f64(normal.sample(rng)))
            .collect();
        let n = norm(&z);
        if n > T::zero() {
            return z.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Samples `g` at `x` given the already-computed true gradient. Used by the
/// optimizer loop, which needs `∇f(x)` for its own metrics anyway.
pub(crate) fn sample_with_grad<T: Real, R: Rng>(
    problem: &Problem<T>,
    model: &NoiseModel<T>,
    x: &[T],
    grad_true: Vec<T>,
    rng: &mut R,
) -> Result<GradientSample<T>> {
    let d = x.len();
    let additive = |xi: Vec<T>, grad_true: Vec<T>| {
        let g = grad_true
            .iter()
            .zip(&xi)
            .map(|(&a, &b)| a + b)
            .collect();
        GradientSample { g, grad_true, xi }
    };
    match model {
        NoiseModel::Exact => Ok(additive(vec![T::zero(); d], grad_true)),
        NoiseModel::AdditiveGaussian { sigma } => {
            let normal = rand_distr::StandardNormal;
            let xi: Vec<T> = (0..d)
                .map(|_| *sigma * T::from_f64(normal.sample(rng)))
                .collect();
            Ok(additive(xi, grad_true))
        }
        NoiseModel::StrongGrowth { rho, sigma } => {
            let u = unit_sphere::<T, R>(d, rng);
            let sign = if rng.random_bool(0.5) { T::one() } else { -T::one() };
            let half = T::from_f64(0.5);
            let scale = (*rho * half).sqrt() * norm(&grad_true) + *sigma * half.sqrt();
            let xi: Vec<T> = u.into_iter().map(|v| sign * scale * v).collect();
            Ok(additive(xi, grad_true))
        }
        NoiseModel::BoundedSphere { sigma } => {
            let u = unit_sphere::<T, R>(d, rng);
            let r = if *sigma > T::zero() {
                T::from_f64(rng.random_range(0.0..=1.0)) * *sigma
            } else {
                T::zero()
            };
            let xi: Vec<T> = u.into_iter().map(|v| r * v).collect();
            Ok(additive(xi, grad_true))
        }
        NoiseModel::MiniBatch { batch_size } => {
            let ls = problem.as_least_squares().ok_or_else(|| {
                Error::Config("mini-batch noise requires a least-squares problem".into())
            })?;
            let n = ls.n_rows();
            let b = *batch_size;
            let mut g = vec![T::zero(); d];
            for _ in 0..b {
                let i = rng.random_range(0..n);
                for (acc, v) in g.iter_mut().zip(ls.row_gradient(i, x)) {
                    *acc = *acc + v;
                }
            }
            let inv_b = T::one() / T::from_usize(b);
            for v in &mut g {
                *v = *v * inv_b;
            }
            let xi = g
                .iter()
                .zip(&grad_true)
                .map(|(&a, &b)| a - b)
                .collect();
            Ok(GradientSample { g, grad_true, xi })
        }
    }
}

/// Draws one stochastic gradient `g = ∇f(x) + ξ` at `x`.
pub fn sample_gradient<T: Real, R: Rng>(
    problem: &Problem<T>,
    model: &NoiseModel<T>,
    x: &[T],
    rng: &mut R,
) -> Result<GradientSample<T>> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    model.validate()?;
    let grad_true = problem.gradient(x);
    sample_with_grad(problem, model, x, grad_true, rng)
}

/// Result of the Monte Carlo unbiasedness check.
#[derive(Clone, Debug, Serialize)]
pub struct UnbiasednessReport {
    /// `‖mean of ξ‖` over the samples.
    pub mean_norm: f64,
    /// `4·s/√n` where `s² = Σ‖ξᵢ − ξ̄‖²/(n−1)` is the scatter of the noise
    /// vectors around their sample mean. (The scatter of the vectors, not of
    /// the scalar `‖ξ‖`: oracles whose noise norm is a deterministic
    /// function of `x` still fluctuate in direction, and it is the vector
    /// mean whose deviation from zero is being tested.)
    pub threshold: f64,
    pub n_samples: usize,
    pub pass: bool,
}

fn unbiasedness_from_samples<T: Real>(xis: &[Vec<T>]) -> UnbiasednessReport {
    let n = xis.len();
    let d = xis[0].len();
    let mut mean = vec![0.0f64; d];
    for xi in xis {
        for (m, &v) in mean.iter_mut().zip(xi) {
            *m += v.as_f64();
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scatter: f64 = xis
        .iter()
        .map(|xi| {
            xi.iter()
                .zip(&mean)
                .map(|(&v, m)| {
                    let dvi = v.as_f64() - m;
                    dvi * dvi
                })
                .sum::<f64>()
        })
        .sum();
    let s = if n > 1 { (scatter / (n - 1) as f64).sqrt() } else { 0.0 };
    let threshold = 4.0 * s / (n as f64).sqrt();
    UnbiasednessReport {
        mean_norm,
        threshold,
        n_samples: n,
        pass: mean_norm <= threshold,
    }
}

/// Monte Carlo check that `E[ξ | x] = 0`: draws `n_samples` gradients at `x`
/// and passes iff the sample-mean norm is within four standard errors of 0.
pub fn check_unbiased<T: Real, R: Rng>(
    problem: &Problem<T>,
    model: &NoiseModel<T>,
    x: &[T],
    n_samples: usize,
    rng: &mut R,
) -> Result<UnbiasednessReport> {
    if n_samples < 1_000 {
        return Err(Error::InvalidInput(format!(
            "unbiasedness check needs n_samples >= 1000, got {n_samples}"
        )));
    }
    let mut xis = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        xis.push(sample_gradient(problem, model, x, rng)?.xi);
    }
    Ok(unbiasedness_from_samples(&xis))
}

/// Per-point detail of the growth-bound check.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthPoint {
    pub grad_norm_sq: f64,
    /// Monte Carlo estimate of `E‖ξ‖²`.
    pub estimate: f64,
    /// Declared bound `ρ‖∇f(x)‖² + σ²`.
    pub bound: f64,
    /// Standard error of the estimate.
    pub std_err: f64,
    pub pass: bool,
}

/// Result of the strong-growth check across a set of points.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    /// Largest `estimate / bound` over the points (0 when both are 0).
    pub worst_ratio: f64,
    pub pass: bool,
    pub points: Vec<GrowthPoint>,
}

/// Checks `E[‖ξ‖² | x] ≤ ρ‖∇f(x)‖² + σ²` at each point, with the `(ρ, σ)`
/// the model declares for this problem, allowing three standard errors of
/// Monte Carlo slack.
pub fn check_growth_bound<T: Real, R: Rng>(
    problem: &Problem<T>,
    model: &NoiseModel<T>,
    points: &[Vec<T>],
    n_samples: usize,
    rng: &mut R,
) -> Result<GrowthReport> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("growth check needs n_samples >= 2".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("growth check needs at least one point".into()));
    }
    let (rho, sigma) = model.declared_growth_params(problem)?;
    let (rho, sigma) = (rho.as_f64(), sigma.as_f64());
    let mut report = GrowthReport {
        worst_ratio: 0.0,
        pass: true,
        points: Vec::with_capacity(points.len()),
    };
    for x in points {
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        let mut grad_norm_sq = 0.0f64;
        for _ in 0..n_samples {
            let s = sample_gradient(problem, model, x, rng)?;
            let v = norm_sq(&s.xi).as_f64();
            sum += v;
            sum_sq += v * v;
            grad_norm_sq = norm_sq(&s.grad_true).as_f64();
        }
        let n = n_samples as f64;
        let estimate = sum / n;
        let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
        let std_err = (var / n).sqrt();
        let bound = rho * grad_norm_sq + sigma * sigma;
        // Scaled slack absorbs rounding when the bound is tight (for
        // example additive Gaussian noise, where E‖ξ‖² equals the bound).
        let pass = estimate <= bound + 3.0 * std_err + 1e-12 * bound.max(1.0);
        let ratio = if bound > 0.0 {
            estimate / bound
        } else if estimate > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        report.worst_ratio = report.worst_ratio.max(ratio);
        report.pass &= pass;
        report.points.push(GrowthPoint {
            grad_norm_sq,
            estimate,
            bound,
            std_err,
            pass,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_least_squares, QuadraticProblem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_problem(d: usize) -> Problem<f64> {
        Problem::Quadratic(
            QuadraticProblem::new(crate::linalg::Matrix::identity(d), vec![0.0; d], 0.0).unwrap(),
        )
    }

    #[test]
    fn exact_model_returns_true_gradient() {
        let p = identity_problem(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_gradient(&p, &NoiseModel::Exact, &[1.0, -2.0, 0.5], &mut rng).unwrap();
        assert_eq!(s.xi, vec![0.0; 3]);
        assert_eq!(s.g, s.grad_true);
        assert_eq!(s.g, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = identity_problem(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_gradient(&p, &NoiseModel::Exact, &[1.0], &mut rng),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn strong_growth_norm_is_deterministic_in_x() {
        let p = identity_problem(4);
        let model = NoiseModel::StrongGrowth { rho: 1.5, sigma: 0.7 };
        let x = [2.0, 0.0, -1.0, 0.5];
        let gnorm = norm(&p.gradient(&x));
        let expect = ((1.5f64 / 2.0).sqrt() * gnorm + 0.7 / 2.0f64.sqrt()).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let s = sample_gradient(&p, &model, &x, &mut rng).unwrap();
            let got = norm_sq(&s.xi);
            assert!((got - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn bounded_sphere_support_holds_on_every_draw() {
        let p = identity_problem(5);
        let model = NoiseModel::BoundedSphere { sigma: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut max_norm = 0.0f64;
        for _ in 0..10_000 {
            let s = sample_gradient(&p, &model, &[0.2; 5], &mut rng).unwrap();
            let n = norm(&s.xi);
            assert!(n <= 1.0 + 1e-15);
            max_norm = max_norm.max(n);
        }
        // The radius is uniform on [0, 1]; the max should approach 1.
        assert!(max_norm > 0.99);
    }

    #[test]
    fn gaussian_monte_carlo_moments() {
        let d = 4;
        let p = identity_problem(d);
        let model = NoiseModel::AdditiveGaussian { sigma: 0.5 };
        let x = vec![1.0; d];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut mean = vec![0.0f64; d];
        let mut second = 0.0f64;
        for _ in 0..n {
            let s = sample_gradient(&p, &model, &x, &mut rng).unwrap();
            for (m, v) in mean.iter_mut().zip(&s.xi) {
                *m += v;
            }
            second += norm_sq(&s.xi);
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        second /= n as f64;
        assert!(norm(&mean) <= 0.01);
        let expect = 0.25 * d as f64;
        assert!((second - expect).abs() <= 0.03 * expect);
    }

    #[test]
    fn minibatch_needs_least_squares() {
        let p = identity_problem(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_gradient(&p, &NoiseModel::MiniBatch { batch_size: 4 }, &[0.0, 0.0], &mut rng);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn minibatch_full_pass_recovers_batch_mean() {
        let ls = make_least_squares::<f64>(5, 12, 3, 0.2).unwrap();
        let p = Problem::LeastSquares(ls);
        let x = [0.4, -0.1, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // With b = 1 the sample is a single-row gradient; averaging many
        // should approach the full gradient by unbiasedness.
        let mut acc = [0.0; 3];
        let n = 200_000;
        for _ in 0..n {
            let s = sample_gradient(&p, &NoiseModel::MiniBatch { batch_size: 1 }, &x, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(&s.g) {
                *a += v;
            }
        }
        let full = p.gradient(&x);
        for (a, f) in acc.iter().zip(&full) {
            assert!((a / n as f64 - f).abs() < 0.05 * f.abs().max(1.0));
        }
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let ls = make_least_squares::<f64>(5, 12, 3, 0.2).unwrap();
        let p = Problem::LeastSquares(ls);
        let models: Vec<NoiseModel<f64>> = vec![
            NoiseModel::Exact,
            NoiseModel::AdditiveGaussian { sigma: 0.3 },
            NoiseModel::StrongGrowth { rho: 0.5, sigma: 1.0 },
            NoiseModel::BoundedSphere { sigma: 2.0 },
            NoiseModel::MiniBatch { batch_size: 3 },
        ];
        let x = [0.1, 0.2, 0.3];
        for model in &models {
            let mut r1 = ChaCha8Rng::seed_from_u64(123);
            let mut r2 = ChaCha8Rng::seed_from_u64(123);
            for _ in 0..10 {
                let a = sample_gradient(&p, model, &x, &mut r1).unwrap();
                let b = sample_gradient(&p, model, &x, &mut r2).unwrap();
                assert_eq!(a.g, b.g, "{model:?} not reproducible");
                assert_eq!(a.xi, b.xi);
            }
        }
    }

    #[test]
    fn unbiasedness_passes_for_all_models() {
        let ls = make_least_squares::<f64>(5, 12, 3, 0.2).unwrap();
        let p = Problem::LeastSquares(ls);
        let models: Vec<NoiseModel<f64>> = vec![
            NoiseModel::Exact,
            NoiseModel::AdditiveGaussian { sigma: 1.0 },
            NoiseModel::StrongGrowth { rho: 1.0, sigma: 1.0 },
            NoiseModel::BoundedSphere { sigma: 1.0 },
            NoiseModel::MiniBatch { batch_size: 2 },
        ];
        let x = [0.5, -0.5, 0.25];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for model in &models {
            let rep = check_unbiased(&p, model, &x, 20_000, &mut rng).unwrap();
            assert!(rep.pass, "{model:?}: {rep:?}");
            assert!(rep.mean_norm <= rep.threshold);
        }
    }

    #[test]
    fn unbiasedness_rejects_small_samples() {
        let p = identity_problem(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(check_unbiased(&p, &NoiseModel::Exact, &[0.0, 0.0], 999, &mut rng).is_err());
    }

    #[test]
    fn biased_samples_fail_the_unbiasedness_test() {
        // Shift Gaussian noise by 0.5 in the first coordinate.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let normal = rand_distr::StandardNormal;
        let xis: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                vec![
                    0.5 + <rand_distr::StandardNormal as Distribution<f64>>::sample(&normal, &mut rng),
                    <rand_distr::StandardNormal as Distribution<f64>>::sample(&normal, &mut rng),
                ]
            })
            .collect();
        let rep = unbiasedness_from_samples(&xis);
        assert!(!rep.pass);
        assert!(rep.mean_norm > rep.threshold);
    }

    #[test]
    fn growth_bound_examples() {
        // Exact: trivial pass with zero ratio.
        let p = identity_problem(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = check_growth_bound(&p, &NoiseModel::Exact, &[vec![1.0, 1.0]], 100, &mut rng).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.worst_ratio, 0.0);

        // StrongGrowth(1, 1) at ‖∇f‖ = 2: exact second moment is
        // (√½·2 + 1/√2)² = 4.5, under the declared bound 1·4 + 1 = 5.
        let model = NoiseModel::StrongGrowth { rho: 1.0, sigma: 1.0 };
        let rep = check_growth_bound(&p, &model, &[vec![2.0, 0.0]], 10_000, &mut rng).unwrap();
        assert!(rep.pass);
        let pt = &rep.points[0];
        assert!((pt.estimate - 4.5).abs() < 1e-9);
        assert!((pt.bound - 5.0).abs() < 1e-12);

        // AdditiveGaussian(σ) declared as (0, σ√d): E‖ξ‖² = σ²d exactly.
        let model = NoiseModel::AdditiveGaussian { sigma: 0.8 };
        let rep =
            check_growth_bound(&p, &model, &[vec![0.3, -0.4], vec![1.0, 2.0]], 50_000, &mut rng)
                .unwrap();
        assert!(rep.pass, "{rep:?}");

        // BoundedSphere and MiniBatch on least squares.
        let ls = make_least_squares::<f64>(5, 12, 3, 0.2).unwrap();
        let p = Problem::LeastSquares(ls);
        let pts = vec![vec![0.0, 0.0, 0.0], vec![0.5, -0.5, 0.25]];
        for model in [
            NoiseModel::BoundedSphere { sigma: 1.0 },
            NoiseModel::MiniBatch { batch_size: 2 },
        ] {
            let rep = check_growth_bound(&p, &model, &pts, 20_000, &mut rng).unwrap();
            assert!(rep.pass, "{model:?}: {rep:?}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(NoiseModel::AdditiveGaussian { sigma: -1.0f64 }.validate().is_err());
        assert!(NoiseModel::StrongGrowth { rho: -0.1f64, sigma: 1.0 }.validate().is_err());
        assert!(NoiseModel::StrongGrowth { rho: 0.1f64, sigma: f64::NAN }.validate().is_err());
        assert!(NoiseModel::<f64>::MiniBatch { batch_size: 0 }.validate().is_err());
        assert!(NoiseModel::BoundedSphere { sigma: 0.5f64 }.validate().is_ok());
    }
}
