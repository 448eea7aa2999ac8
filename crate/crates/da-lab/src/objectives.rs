//! Benchmark objectives with certified smoothness constants and optimum
//! metadata.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, Matrix};
use crate::scalar::Real;

/// Smooth objective with a known smoothness constant `L`, known minimum
/// value `f*`, and (when available) a closed-form minimizer.
///
/// `value` and `gradient` assume `x.len() == self.dim()`; use [`eval_value`]
/// and [`eval_grad`] for validated entry points.
pub trait Objective<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T]) -> Vec<T>;
    /// Smoothness constant valid on the problem's domain of interest.
    fn smoothness(&self) -> T;
    fn f_star(&self) -> T;
    fn minimizer(&self) -> Option<&[T]>;
}

/// `f(x)` with dimension validation.
pub fn eval_value<T: Real>(problem: &dyn Objective<T>, x: &[T]) -> Result<T> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    Ok(problem.value(x))
}

/// `∇f(x)` with dimension validation.
pub fn eval_grad<T: Real>(problem: &dyn Objective<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    Ok(problem.gradient(x))
}

/// `½ xᵀA x − bᵀx + c` with symmetric positive semidefinite `A`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem<T> {
    a: Matrix<T>,
    b: Vec<T>,
    c: T,
    smoothness: T,
    f_star: T,
    x_star: Vec<T>,
}

impl<T: Real> QuadraticProblem<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>, c: T) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::InvalidInput("quadratic matrix must be square".into()));
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let scale = (0..n)
            .map(|i| a.at(i, i).abs())
            .fold(T::zero(), T::max)
            .max(T::one());
        if !a.is_symmetric(T::from_f64(1e-10) * scale) {
            return Err(Error::InvalidInput("quadratic matrix must be symmetric".into()));
        }
        let eig = a.symmetric_eigenvalues()?;
        let lam_max = *eig.last().expect("n >= 1");
        let lam_min = eig[0];
        if lam_min < -T::from_f64(1e-10) * lam_max.abs().max(T::one()) {
            return Err(Error::InvalidInput(
                "quadratic matrix must be positive semidefinite".into(),
            ));
        }
        // x* solves A x = b. A singular PSD matrix is accepted only with
        // b = 0, where x* = 0 works; otherwise f may be unbounded below.
        let x_star = match a.cholesky_solve(&b) {
            Ok(x) => x,
            Err(_) if b.iter().all(|&v| v == T::zero()) => vec![T::zero(); n],
            Err(_) => {
                return Err(Error::InvalidInput(
                    "singular quadratic needs b = 0 for a finite minimum".into(),
                ))
            }
        };
        let mut p = QuadraticProblem {
            a,
            b,
            c,
            smoothness: lam_max,
            f_star: T::zero(),
            x_star,
        };
        p.f_star = p.value(&p.x_star.clone());
        Ok(p)
    }

    /// Benchmark instance: diagonal spectrum spread linearly over
    /// `[1, condition]` (so `L = condition`) and `b = 1/√d · (1,…,1)`, which
    /// keeps the start `x = 0` away from the optimum. Gradient-norm metrics
    /// are rotation invariant, so a diagonal representative loses nothing.
    pub fn conditioned(dim: usize, condition: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if condition < 1.0 || !condition.is_finite() {
            return Err(Error::InvalidInput("condition number must be >= 1".into()));
        }
        let lam: Vec<T> = (0..dim)
            .map(|i| {
                let frac = if dim == 1 { 0.0 } else { i as f64 / (dim - 1) as f64 };
                T::from_f64(1.0 + (condition - 1.0) * frac)
            })
            .collect();
        let b = vec![T::one() / T::from_usize(dim).sqrt(); dim];
        Self::new(Matrix::diagonal(&lam), b, T::zero())
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn linear_term(&self) -> &[T] {
        &self.b
    }
}

impl<T: Real> Objective<T> for QuadraticProblem<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[T]) -> T {
        let ax = self.a.matvec(x);
        T::from_f64(0.5) * dot(x, &ax) - dot(&self.b, x) + self.c
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = self.a.matvec(x);
        for (gi, &bi) in g.iter_mut().zip(&self.b) {
            *gi = *gi - bi;
        }
        g
    }

    fn smoothness(&self) -> T {
        self.smoothness
    }

    fn f_star(&self) -> T {
        self.f_star
    }

    fn minimizer(&self) -> Option<&[T]> {
        Some(&self.x_star)
    }
}

/// `f(x) = ‖Mx − y‖² / (2n)` with per-row gradients available for
/// mini-batch sampling.
#[derive(Clone, Debug)]
pub struct LeastSquaresProblem<T> {
    m: Matrix<T>,
    y: Vec<T>,
    smoothness: T,
    strong_convexity: T,
    max_row_sq: T,
    f_star: T,
    x_star: Vec<T>,
}

/// Synthetic least-squares instance: `M` has i.i.d. standard normal entries,
/// `y = M x_true + label_noise · ε` with `x_true` and `ε` standard normal,
/// all drawn from one generator seeded with `seed` (entries of `M` row-major
/// first, then `x_true`, then `ε`). Fully deterministic given the arguments.
pub fn make_least_squares<T: Real>(
    seed: u64,
    n: usize,
    d: usize,
    label_noise: f64,
) -> Result<LeastSquaresProblem<T>> {
    if d == 0 || n < d {
        return Err(Error::InvalidInput(format!(
            "least squares needs n >= d >= 1, got n = {n}, d = {d}"
        )));
    }
    if !(label_noise >= 0.0) {
        return Err(Error::InvalidInput("label_noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let draw = |rng: &mut ChaCha8Rng| -> T {
        let z: f64 = normal.sample(rng);
        T::from_f64(z)
    };
    let m = Matrix::from_fn(n, d, |_, _| draw(&mut rng));
    let x_true: Vec<T> = (0..d).map(|_| draw(&mut rng)).collect();
    let mut y = m.matvec(&x_true);
    let noise = T::from_f64(label_noise);
    for yi in &mut y {
        *yi = *yi + noise * draw(&mut rng);
    }
    LeastSquaresProblem::from_parts(m, y)
}

impl<T: Real> LeastSquaresProblem<T> {
    /// Builds the problem from explicit data; `M` must have full column rank.
    pub fn from_parts(m: Matrix<T>, y: Vec<T>) -> Result<Self> {
        let (n, d) = (m.rows(), m.cols());
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if d == 0 || n < d {
            return Err(Error::InvalidInput("least squares needs n >= d >= 1".into()));
        }
        let gram = m.gram();
        let eig = gram.symmetric_eigenvalues()?;
        let n_t = T::from_usize(n);
        let smoothness = *eig.last().expect("d >= 1") / n_t;
        let strong_convexity = eig[0] / n_t;
        if strong_convexity <= T::zero() {
            return Err(Error::InvalidInput(
                "design matrix must have full column rank".into(),
            ));
        }
        let rhs = m.tr_matvec(&y);
        let x_star = gram.cholesky_solve(&rhs)?;
        let max_row_sq = (0..n)
            .map(|i| norm_sq(m.row(i)))
            .fold(T::zero(), T::max);
        let mut p = LeastSquaresProblem {
            m,
            y,
            smoothness,
            strong_convexity,
            max_row_sq,
            f_star: T::zero(),
            x_star,
        };
        p.f_star = p.value(&p.x_star.clone());
        Ok(p)
    }

    pub fn n_rows(&self) -> usize {
        self.m.rows()
    }

    /// Gradient of the single-row loss `½(mᵢᵀx − yᵢ)²`. Averaging over a
    /// uniformly random row reproduces `∇f` in expectation.
    pub fn row_gradient(&self, i: usize, x: &[T]) -> Vec<T> {
        let r = self.m.row(i);
        let resid = dot(r, x) - self.y[i];
        r.iter().map(|&v| v * resid).collect()
    }

    /// Smallest eigenvalue of `MᵀM/n`.
    pub fn strong_convexity(&self) -> T {
        self.strong_convexity
    }

    /// `(ρ, σ)` certified for the mini-batch oracle with the given batch
    /// size, sampling rows with replacement:
    ///
    /// `E‖ξ‖² ≤ (1/b)·(1/n)Σᵢ‖mᵢ‖²(mᵢᵀx−yᵢ)² ≤ (maxᵢ‖mᵢ‖²/b)·2f(x)`,
    /// and `f(x) ≤ f* + ‖∇f(x)‖²/(2μ)` with `μ = λ_min(MᵀM)/n`, so
    /// `ρ = maxᵢ‖mᵢ‖²/(bμ)` and `σ² = 2·maxᵢ‖mᵢ‖²·f*/b`.
    pub fn minibatch_growth_params(&self, batch_size: usize) -> Result<(T, T)> {
        if batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        let b = T::from_usize(batch_size);
        let rho = self.max_row_sq / (b * self.strong_convexity);
        let sigma_sq = T::from_f64(2.0) * self.max_row_sq * self.f_star / b;
        Ok((rho, sigma_sq.max(T::zero()).sqrt()))
    }
}

impl<T: Real> Objective<T> for LeastSquaresProblem<T> {
    fn dim(&self) -> usize {
        self.m.cols()
    }

    fn value(&self, x: &[T]) -> T {
        let r = self.m.matvec(x);
        let ss: T = r
            .iter()
            .zip(&self.y)
            .map(|(&ri, &yi)| (ri - yi) * (ri - yi))
            .sum();
        ss / (T::from_f64(2.0) * T::from_usize(self.m.rows()))
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut r = self.m.matvec(x);
        for (ri, &yi) in r.iter_mut().zip(&self.y) {
            *ri = *ri - yi;
        }
        let mut g = self.m.tr_matvec(&r);
        let inv_n = T::one() / T::from_usize(self.m.rows());
        for gi in &mut g {
            *gi = *gi * inv_n;
        }
        g
    }

    fn smoothness(&self) -> T {
        self.smoothness
    }

    fn f_star(&self) -> T {
        self.f_star
    }

    fn minimizer(&self) -> Option<&[T]> {
        Some(&self.x_star)
    }
}

/// `(1 − x₁)² + 100(x₂ − x₁²)²` restricted to the box `[−2, 2]²`.
///
/// The global smoothness constant is the maximum Hessian spectral norm over
/// a 401×401 grid on the box; the gradient-norm guarantees only apply while
/// iterates stay inside it.
#[derive(Clone, Debug)]
pub struct RosenbrockProblem<T> {
    smoothness: T,
    x_star: [T; 2],
}

impl<T: Real> Default for RosenbrockProblem<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> RosenbrockProblem<T> {
    pub fn new() -> Self {
        // Hessian: [[2 − 400x₂ + 1200x₁², −400x₁], [−400x₁, 200]].
        let mut best = 0.0f64;
        let grid = 401;
        for i in 0..grid {
            let x1 = -2.0 + 4.0 * i as f64 / (grid - 1) as f64;
            for j in 0..grid {
                let x2 = -2.0 + 4.0 * j as f64 / (grid - 1) as f64;
                let h11 = 2.0 - 400.0 * x2 + 1200.0 * x1 * x1;
                let h12 = -400.0 * x1;
                let h22 = 200.0;
                let mean = 0.5 * (h11 + h22);
                let disc = (0.5 * (h11 - h22)).hypot(h12);
                let lam = (mean + disc).abs().max((mean - disc).abs());
                best = best.max(lam);
            }
        }
        RosenbrockProblem {
            smoothness: T::from_f64(best),
            x_star: [T::one(), T::one()],
        }
    }
}

impl<T: Real> Objective<T> for RosenbrockProblem<T> {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[T]) -> T {
        let one = T::one();
        let c100 = T::from_f64(100.0);
        let d = one - x[0];
        let q = x[1] - x[0] * x[0];
        d * d + c100 * q * q
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let two = T::from_f64(2.0);
        let c200 = T::from_f64(200.0);
        let c400 = T::from_f64(400.0);
        let q = x[1] - x[0] * x[0];
        vec![-two * (T::one() - x[0]) - c400 * x[0] * q, c200 * q]
    }

    fn smoothness(&self) -> T {
        self.smoothness
    }

    fn f_star(&self) -> T {
        T::zero()
    }

    fn minimizer(&self) -> Option<&[T]> {
        Some(&self.x_star)
    }
}

/// Config-driven problem dispatch.
#[derive(Clone, Debug)]
pub enum Problem<T> {
    Quadratic(QuadraticProblem<T>),
    LeastSquares(LeastSquaresProblem<T>),
    Rosenbrock(RosenbrockProblem<T>),
}

impl<T: Real> Problem<T> {
    pub fn as_least_squares(&self) -> Option<&LeastSquaresProblem<T>> {
        match self {
            Problem::LeastSquares(p) => Some(p),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn Objective<T> {
        match self {
            Problem::Quadratic(p) => p,
            Problem::LeastSquares(p) => p,
            Problem::Rosenbrock(p) => p,
        }
    }
}

impl<T: Real> Objective<T> for Problem<T> {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn value(&self, x: &[T]) -> T {
        self.inner().value(x)
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        self.inner().gradient(x)
    }

    fn smoothness(&self) -> T {
        self.inner().smoothness()
    }

    fn f_star(&self) -> T {
        self.inner().f_star()
    }

    fn minimizer(&self) -> Option<&[T]> {
        self.inner().minimizer()
    }
}
