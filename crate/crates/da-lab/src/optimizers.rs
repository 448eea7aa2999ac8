//! Steppers for dual averaging, plain SGD, the regularized-SGD view of dual
//! averaging, and the adaptive (AdaGrad-norm) variant, plus the run loop
//! that produces traces and the shared-noise paired runner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{StepRecord, Trace};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::noise::{sample_with_grad, NoiseModel};
use crate::objectives::{Objective, Problem};
use crate::scalar::Real;
use crate::schedules::{AdaGradState, ScheduleParams};

/// Which update rule drives a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// `x_{t+1} = −η_t·Σ_{i≤t} g_i` — every past gradient gets the current
    /// step size.
    Sda,
    /// `x_{t+1} = x_t − η_t·g_t` — gradient `g_i` keeps its own `η_i`.
    Sgd,
    /// SGD on `f(x) + (γ_t/2)‖x‖²` with `γ_t = 1/η_t − 1/η_{t−1}`; follows
    /// the same trajectory as `Sda` for any deterministic schedule.
    RegularizedSgd,
    /// Dual averaging with `η_t = η/√(γ_reg + Σ_{i≤t}‖g_i‖²)`.
    AdaDa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sda => "sda",
            Algorithm::Sgd => "sgd",
            Algorithm::RegularizedSgd => "regularized_sgd",
            Algorithm::AdaDa => "ada_da",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mutable state of one optimizer run. Starts at `x_1 = 0` with an empty
/// dual accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    /// Current iterate `x_t`.
    pub x: Vec<T>,
    /// Dual accumulator `θ_t = Σ_{i<t} g_i` (kept by every stepper, so the
    /// weighting diagnostic can compare rules on one state type).
    pub theta: Vec<T>,
    /// 1-based step counter: the next step consumes `g_t`.
    pub t: usize,
    /// Present only for the adaptive variant.
    pub adagrad: Option<AdaGradState<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(dim: usize) -> Self {
        OptimizerState {
            x: vec![T::zero(); dim],
            theta: vec![T::zero(); dim],
            t: 1,
            adagrad: None,
        }
    }

    pub fn with_adagrad(dim: usize, gamma_reg: T) -> Self {
        OptimizerState {
            adagrad: Some(AdaGradState::new(gamma_reg)),
            ..Self::new(dim)
        }
    }

    fn check_dim(&self, g: &[T]) -> Result<()> {
        if g.len() != self.x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                got: g.len(),
            });
        }
        Ok(())
    }

    /// Dual-averaging step: `θ += g`, `x = −η_t·θ`.
    pub fn sda_step(&mut self, g: &[T], eta_t: T) -> Result<()> {
        self.check_dim(g)?;
        for (th, &gi) in self.theta.iter_mut().zip(g) {
            *th = *th + gi;
        }
        for (xi, &th) in self.x.iter_mut().zip(&self.theta) {
            *xi = -eta_t * th;
        }
        self.t += 1;
        Ok(())
    }

    /// Plain gradient step: `x −= η_t·g` (the accumulator is still
    /// maintained for diagnostics).
    pub fn sgd_step(&mut self, g: &[T], eta_t: T) -> Result<()> {
        self.check_dim(g)?;
        for ((xi, th), &gi) in self.x.iter_mut().zip(&mut self.theta).zip(g) {
            *xi = *xi - eta_t * gi;
            *th = *th + gi;
        }
        self.t += 1;
        Ok(())
    }

    /// Gradient step on the regularized objective:
    /// `x −= η_t·(g + γ_t·x)`.
    pub fn regularized_sgd_step(&mut self, g: &[T], eta_t: T, gamma_t: T) -> Result<()> {
        self.check_dim(g)?;
        for ((xi, th), &gi) in self.x.iter_mut().zip(&mut self.theta).zip(g) {
            *xi = *xi - eta_t * (gi + gamma_t * *xi);
            *th = *th + gi;
        }
        self.t += 1;
        Ok(())
    }

    /// Adaptive dual-averaging step. Returns the step size used, or `None`
    /// when the step is skipped because `‖g‖ = 0` with an empty accumulator
    /// (zero regularization and no gradient signal yet — the step size is
    /// undefined, and the iterate could not move anyway).
    pub fn ada_da_step(&mut self, g: &[T], base_eta: T) -> Result<Option<T>> {
        self.check_dim(g)?;
        let ada = self.adagrad.as_mut().ok_or_else(|| {
            Error::MissingState("state was not built with an AdaGrad accumulator".into())
        })?;
        if norm_sq(g) == T::zero() && ada.sum() == T::zero() {
            self.t += 1;
            return Ok(None);
        }
        ada.update(g);
        let eta_t = ada.eta(base_eta)?;
        for (th, &gi) in self.theta.iter_mut().zip(g) {
            *th = *th + gi;
        }
        for (xi, &th) in self.x.iter_mut().zip(&self.theta) {
            *xi = -eta_t * th;
        }
        self.t += 1;
        Ok(Some(eta_t))
    }
}

/// Coefficient of each past gradient in the current iterate, read off by
/// feeding the unit basis vectors as the gradient stream: after `steps`
/// steps, entry `i` is the weight of `g_{i+1}` in `x_{steps+1}`. Dual
/// averaging weights every gradient by `−η_T`; SGD keeps `−η_i`.
pub fn gradient_weights<T: Real>(
    algorithm: Algorithm,
    schedule: &ScheduleParams<T>,
    steps: usize,
) -> Result<Vec<T>> {
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be >= 1".into()));
    }
    if !matches!(algorithm, Algorithm::Sda | Algorithm::Sgd) {
        return Err(Error::InvalidInput(
            "the weighting diagnostic applies to sda and sgd".into(),
        ));
    }
    schedule.validate()?;
    let mut state = OptimizerState::new(steps);
    for t in 1..=steps {
        let mut g = vec![T::zero(); steps];
        g[t - 1] = T::one();
        let eta = schedule.eta(t)?;
        match algorithm {
            Algorithm::Sda => state.sda_step(&g, eta)?,
            Algorithm::Sgd => state.sgd_step(&g, eta)?,
            _ => unreachable!(),
        }
    }
    Ok(state.x)
}

/// Everything a single run needs besides the problem.
#[derive(Clone, Debug)]
pub struct RunConfig<T> {
    pub horizon: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub noise: NoiseModel<T>,
    pub schedule: ScheduleParams<T>,
    /// Store every iterate and noise vector (memory scales with `T·d`).
    pub record_full_iterates: bool,
}

impl<T: Real> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        self.noise.validate()?;
        self.schedule.validate()?;
        let adaptive = self.schedule.is_state_dependent();
        match (self.algorithm, adaptive) {
            (Algorithm::AdaDa, false) => Err(Error::Config(
                "ada_da requires the adagrad_norm schedule".into(),
            )),
            (Algorithm::AdaDa, true) => Ok(()),
            (_, true) => Err(Error::Config(format!(
                "the adagrad_norm schedule requires ada_da, not {}",
                self.algorithm
            ))),
            (_, false) => Ok(()),
        }
    }
}

struct StepMetrics<T> {
    grad_true: Vec<T>,
    rec: StepRecord<T>,
}

/// Metrics at the current iterate, with `b_max` folded forward.
fn measure<T: Real>(
    problem: &Problem<T>,
    x: &[T],
    x_star: &[T],
    b_max: &mut T,
) -> StepMetrics<T> {
    let grad_true = problem.gradient(x);
    let half = T::from_f64(0.5);
    let xn_sq = norm_sq(x);
    let x_norm = xn_sq.sqrt();
    let dist_sq: T = x
        .iter()
        .zip(x_star)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let b_t = dist_sq.sqrt() * x_norm + half * dist_sq + xn_sq;
    *b_max = (*b_max).max(b_t);
    StepMetrics {
        rec: StepRecord {
            eta: T::zero(),
            grad_sq: norm_sq(&grad_true),
            f_val: problem.value(x),
            x_norm,
            xi_sq: T::zero(),
            b_running: *b_max,
        },
        grad_true,
    }
}

fn minimizer_of<T: Real>(problem: &Problem<T>) -> Result<Vec<T>> {
    problem
        .minimizer()
        .map(|s| s.to_vec())
        .ok_or_else(|| Error::InvalidInput("problem has no known minimizer".into()))
}

fn advance<T: Real>(
    state: &mut OptimizerState<T>,
    algorithm: Algorithm,
    schedule: &ScheduleParams<T>,
    g: &[T],
    t: usize,
) -> Result<T> {
    Ok(match algorithm {
        Algorithm::Sda => {
            let eta = schedule.eta(t)?;
            state.sda_step(g, eta)?;
            eta
        }
        Algorithm::Sgd => {
            let eta = schedule.eta(t)?;
            state.sgd_step(g, eta)?;
            eta
        }
        Algorithm::RegularizedSgd => {
            let eta = schedule.eta(t)?;
            let gamma = schedule.gamma(t)?;
            state.regularized_sgd_step(g, eta, gamma)?;
            eta
        }
        Algorithm::AdaDa => {
            let base = match schedule {
                ScheduleParams::AdaGradNorm { eta, .. } => *eta,
                _ => unreachable!("validated"),
            };
            // A skipped step records η = 0.
            state.ada_da_step(g, base)?.unwrap_or_else(T::zero)
        }
    })
}

fn check_finite<T: Real>(state: &OptimizerState<T>, rec: &StepRecord<T>, t: usize) -> Result<()> {
    let metrics_ok =
        rec.grad_sq.is_finite() && rec.f_val.is_finite() && rec.x_norm.is_finite();
    if metrics_ok && state.x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { step: t })
    }
}

/// Runs one algorithm for `horizon` steps from `x_1 = 0`, recording per-step
/// metrics (measured at the pre-step iterate). Deterministic given the seed.
pub fn run<T: Real>(problem: &Problem<T>, cfg: &RunConfig<T>) -> Result<Trace<T>> {
    cfg.validate()?;
    let d = problem.dim();
    let x_star = minimizer_of(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = match cfg.algorithm {
        Algorithm::AdaDa => {
            let gamma_reg = match cfg.schedule {
                ScheduleParams::AdaGradNorm { gamma_reg, .. } => gamma_reg,
                _ => unreachable!("validated"),
            };
            OptimizerState::with_adagrad(d, gamma_reg)
        }
        _ => OptimizerState::new(d),
    };
    let mut trace = Trace::with_capacity(cfg.horizon, cfg.record_full_iterates);
    if let Some(full) = &mut trace.full {
        full.xs.push(state.x.clone());
    }
    let mut b_max = T::zero();
    for t in 1..=cfg.horizon {
        let StepMetrics { grad_true, mut rec } = measure(problem, &state.x, &x_star, &mut b_max);
        let sample = sample_with_grad(problem, &cfg.noise, &state.x, grad_true, &mut rng)?;
        rec.xi_sq = norm_sq(&sample.xi);
        rec.eta = advance(&mut state, cfg.algorithm, &cfg.schedule, &sample.g, t)?;
        if let Some(full) = &mut trace.full {
            full.xs.push(state.x.clone());
            full.xis.push(sample.xi);
        }
        check_finite(&state, &rec, t)?;
        trace.push(rec);
    }
    Ok(trace)
}

/// Shared-noise comparison of several algorithms.
#[derive(Clone, Debug)]
pub struct PairedRuns<T> {
    pub algorithms: Vec<Algorithm>,
    /// One trace per algorithm, in the order given.
    pub traces: Vec<Trace<T>>,
    /// Per-step relative deviation `‖x_a − x_b‖_∞ / max(1, ‖x_a‖_∞)`
    /// between the dual-averaging and regularized-SGD iterates (after each
    /// step), present when both algorithms were requested.
    pub equivalence_dev: Option<Vec<T>>,
    /// Maximum of `equivalence_dev`.
    pub max_equivalence_dev: Option<T>,
}

/// Runs several algorithms on one gradient stream: at each step the
/// stochastic gradient is sampled once, at the first algorithm's iterate,
/// and fed identically to every algorithm. This makes trajectory identities
/// (dual averaging vs its regularized-SGD view) testable pathwise.
///
/// Each trace's noise column records `g_t − ∇f(x_t)` at that algorithm's
/// own iterate.
pub fn run_paired<T: Real>(
    problem: &Problem<T>,
    cfg: &RunConfig<T>,
    algorithms: &[Algorithm],
) -> Result<PairedRuns<T>> {
    if algorithms.len() < 2 {
        return Err(Error::Config("paired runs need at least 2 algorithms".into()));
    }
    if algorithms.contains(&Algorithm::AdaDa) {
        return Err(Error::Config(
            "paired runs share one deterministic schedule; ada_da is not comparable".into(),
        ));
    }
    for &a in algorithms {
        RunConfig { algorithm: a, ..cfg.clone() }.validate()?;
    }
    let d = problem.dim();
    let x_star = minimizer_of(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states: Vec<OptimizerState<T>> =
        algorithms.iter().map(|_| OptimizerState::new(d)).collect();
    let mut traces: Vec<Trace<T>> = algorithms
        .iter()
        .map(|_| Trace::with_capacity(cfg.horizon, cfg.record_full_iterates))
        .collect();
    for trace in &mut traces {
        if let Some(full) = &mut trace.full {
            full.xs.push(vec![T::zero(); d]);
        }
    }
    let mut b_max = vec![T::zero(); algorithms.len()];
    let pair = {
        let a = algorithms.iter().position(|&a| a == Algorithm::Sda);
        let b = algorithms.iter().position(|&a| a == Algorithm::RegularizedSgd);
        a.zip(b)
    };
    let mut devs: Vec<T> = Vec::new();
    for t in 1..=cfg.horizon {
        // One sample at the lead algorithm's iterate, shared by all.
        let lead_grad = problem.gradient(&states[0].x);
        let sample = sample_with_grad(problem, &cfg.noise, &states[0].x, lead_grad, &mut rng)?;
        for (i, &algorithm) in algorithms.iter().enumerate() {
            let StepMetrics { grad_true, mut rec } =
                measure(problem, &states[i].x, &x_star, &mut b_max[i]);
            let xi: Vec<T> = sample
                .g
                .iter()
                .zip(&grad_true)
                .map(|(&a, &b)| a - b)
                .collect();
            rec.xi_sq = norm_sq(&xi);
            rec.eta = advance(&mut states[i], algorithm, &cfg.schedule, &sample.g, t)?;
            if let Some(full) = &mut traces[i].full {
                full.xs.push(states[i].x.clone());
                full.xis.push(xi);
            }
            check_finite(&states[i], &rec, t)?;
            traces[i].push(rec);
        }
        if let Some((ia, ib)) = pair {
            let inf = |v: &[T]| v.iter().fold(T::zero(), |m, &c| m.max(c.abs()));
            let diff: Vec<T> = states[ia]
                .x
                .iter()
                .zip(&states[ib].x)
                .map(|(&a, &b)| a - b)
                .collect();
            devs.push(inf(&diff) / inf(&states[ia].x).max(T::one()));
        }
    }
    let max_dev = devs.iter().copied().fold(None, |m: Option<T>, v| {
        Some(m.map_or(v, |m| m.max(v)))
    });
    Ok(PairedRuns {
        algorithms: algorithms.to_vec(),
        traces,
        equivalence_dev: pair.map(|_| devs),
        max_equivalence_dev: max_dev,
    })
}
