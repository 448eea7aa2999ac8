//! Convergence metrics, closed-form bound evaluators, step-size inequality
//! verifiers, the per-step descent check, and ensemble statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::numeric::{sqrt_gap, sqrt_gap_decrement, NeumaierSum};
use crate::objectives::Objective;
use crate::scalar::Real;

/// Optional full-resolution storage for a run.
#[derive(Clone, Debug, PartialEq)]
pub struct FullIterates<T> {
    /// Iterates `x_1 … x_{T+1}` — one more entry than recorded steps, so the
    /// per-step descent check can see both endpoints of every step.
    pub xs: Vec<Vec<T>>,
    /// Noise vectors `ξ_1 … ξ_T`.
    pub xis: Vec<Vec<T>>,
}

/// Scalar summary of one optimizer step (metrics at the pre-step iterate).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord<T> {
    /// Step size used (0 marks a skipped adaptive step).
    pub eta: T,
    /// `‖∇f(x_t)‖²`.
    pub grad_sq: T,
    /// `f(x_t)`.
    pub f_val: T,
    /// `‖x_t‖`.
    pub x_norm: T,
    /// `‖ξ_t‖²`.
    pub xi_sq: T,
    /// Running max of `‖x_t−x*‖‖x_t‖ + ½‖x_t−x*‖² + ‖x_t‖²` up to `t`.
    pub b_running: T,
}

/// Per-step record of one run, stored column-wise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace<T> {
    pub eta: Vec<T>,
    pub grad_sq: Vec<T>,
    pub f_val: Vec<T>,
    pub x_norm: Vec<T>,
    pub xi_sq: Vec<T>,
    pub b_running: Vec<T>,
    pub full: Option<FullIterates<T>>,
}

impl<T: Real> Trace<T> {
    pub fn with_capacity(n: usize, record_full: bool) -> Self {
        Trace {
            eta: Vec::with_capacity(n),
            grad_sq: Vec::with_capacity(n),
            f_val: Vec::with_capacity(n),
            x_norm: Vec::with_capacity(n),
            xi_sq: Vec::with_capacity(n),
            b_running: Vec::with_capacity(n),
            full: record_full.then(|| FullIterates {
                xs: Vec::with_capacity(n + 1),
                xis: Vec::with_capacity(n),
            }),
        }
    }

    pub fn push(&mut self, rec: StepRecord<T>) {
        self.eta.push(rec.eta);
        self.grad_sq.push(rec.grad_sq);
        self.f_val.push(rec.f_val);
        self.x_norm.push(rec.x_norm);
        self.xi_sq.push(rec.xi_sq);
        self.b_running.push(rec.b_running);
    }

    /// Record of step `t` (1-based).
    pub fn record(&self, t: usize) -> StepRecord<T> {
        let i = t - 1;
        StepRecord {
            eta: self.eta[i],
            grad_sq: self.grad_sq[i],
            f_val: self.f_val[i],
            x_norm: self.x_norm[i],
            xi_sq: self.xi_sq[i],
            b_running: self.b_running[i],
        }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

fn check_horizon<T: Real>(trace: &Trace<T>, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    if horizon > trace.len() {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} exceeds trace length {}",
            trace.len()
        )));
    }
    Ok(())
}

/// `(1/T)·Σ_{t≤T} ‖∇f(x_t)‖²`, the stationarity measure every bound here
/// controls. Compensated summation keeps long horizons exact.
pub fn avg_sq_grad<T: Real>(trace: &Trace<T>, horizon: usize) -> Result<T> {
    Ok(sum_sq_grad(trace, horizon)? / T::from_usize(horizon))
}

/// `Σ_{t≤T} ‖∇f(x_t)‖²` (the adaptive-schedule bound controls the sum).
pub fn sum_sq_grad<T: Real>(trace: &Trace<T>, horizon: usize) -> Result<T> {
    check_horizon(trace, horizon)?;
    let mut acc = NeumaierSum::new();
    for &v in &trace.grad_sq[..horizon] {
        acc.add(v);
    }
    Ok(acc.value())
}

/// Inputs shared by the closed-form bound evaluators.
#[derive(Clone, Copy, Debug)]
pub struct BoundInputs<T> {
    pub lipschitz: T,
    /// Growth-condition slope; ignored by the high-probability bound.
    pub rho: T,
    pub sigma: T,
    /// `Δ = f(0) − f*`.
    pub gap: T,
    pub horizon: usize,
    /// Failure probability `δ` for the high-probability bound.
    pub failure_prob: Option<f64>,
}

fn validate_bound_inputs<T: Real>(inputs: &BoundInputs<T>) -> Result<()> {
    if !(inputs.lipschitz > T::zero() && inputs.lipschitz.is_finite()) {
        return Err(Error::InvalidInput("lipschitz must be finite and > 0".into()));
    }
    if inputs.rho < T::zero() || inputs.sigma < T::zero() || inputs.gap < T::zero() {
        return Err(Error::InvalidInput("rho, sigma, gap must be >= 0".into()));
    }
    if inputs.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    Ok(())
}

/// In-expectation guarantee for the strong-growth schedule:
///
/// `(10Δ + 4(σ²/(L(1+ρ)) + L(1+ρ))·ln(1+α√T)) · (L(1+ρ)² + σ√T)/T`
///
/// with `α = min{σ/(L(1+ρ)), 1}`. Bounds the expected stationarity measure
/// `(1/T)Σ E‖∇f(x_t)‖²`.
pub fn bound_expectation_rhs<T: Real>(inputs: &BoundInputs<T>) -> Result<T> {
    validate_bound_inputs(inputs)?;
    let (l, rho, sigma, gap) = (inputs.lipschitz, inputs.rho, inputs.sigma, inputs.gap);
    let t = T::from_usize(inputs.horizon);
    let c = l * (T::one() + rho);
    let alpha = (sigma / c).min(T::one());
    let ten = T::from_f64(10.0);
    let four = T::from_f64(4.0);
    let slow = four * (sigma * sigma / c + c) * (T::one() + alpha * t.sqrt()).ln();
    let rate = (c * (T::one() + rho) + sigma * t.sqrt()) / t;
    Ok((ten * gap + slow) * rate)
}

/// High-probability guarantee for the `η_t = 1/(L+σ√t)` schedule:
///
/// `(6Δ + 18(L+σ)·ln(1+σ√T/L) + 36σ²/(L+σ)·ln(1/δ)) · (L+σ√T)/T`,
///
/// which the stationarity measure of a single run exceeds with probability
/// at most `δ` under bounded (sub-Gaussian) noise.
pub fn bound_highprob_rhs<T: Real>(inputs: &BoundInputs<T>) -> Result<T> {
    validate_bound_inputs(inputs)?;
    let delta = inputs.failure_prob.ok_or_else(|| {
        Error::InvalidInput("high-probability bound needs failure_prob".into())
    })?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "failure_prob must lie in (0,1), got {delta}"
        )));
    }
    let (l, sigma, gap) = (inputs.lipschitz, inputs.sigma, inputs.gap);
    let t = T::from_usize(inputs.horizon);
    let six = T::from_f64(6.0);
    let log_term = T::from_f64(18.0) * (l + sigma) * (T::one() + sigma * t.sqrt() / l).ln();
    let conf_term =
        T::from_f64(36.0) * sigma * sigma / (l + sigma) * T::from_f64((1.0 / delta).ln());
    let rate = (l + sigma * t.sqrt()) / t;
    Ok((six * gap + log_term + conf_term) * rate)
}

/// Inputs for the adaptive-schedule bound.
#[derive(Clone, Copy, Debug)]
pub struct AdaBoundInputs<T> {
    pub lipschitz: T,
    pub rho: T,
    pub sigma: T,
    /// Numerator `η` of the step-size law `η/√S_t`.
    pub eta: T,
    pub gamma_reg: T,
    /// `Δ = f(0) − f*`.
    pub gap: T,
    /// Empirical estimate of `E[(B_T/η + 2η)²]` across seeds.
    pub ebar: T,
    pub horizon: usize,
}

/// Guarantee for the AdaGrad-norm schedule, bounding the *sum*
/// `Σ_{t≤T} E‖∇f(x_t)‖²` (divide by `T` for the average):
///
/// `2√2·L·σ·√Ebar·√T + 2√2·L²(√2+ρ)·Ebar + γ_reg/2 + 2Δ/η`.
pub fn bound_ada_rhs<T: Real>(inputs: &AdaBoundInputs<T>) -> Result<T> {
    if !(inputs.lipschitz > T::zero()) || !(inputs.eta > T::zero()) {
        return Err(Error::InvalidInput("lipschitz and eta must be > 0".into()));
    }
    if inputs.rho < T::zero()
        || inputs.sigma < T::zero()
        || inputs.gamma_reg < T::zero()
        || inputs.gap < T::zero()
        || inputs.ebar < T::zero()
    {
        return Err(Error::InvalidInput(
            "rho, sigma, gamma_reg, gap, ebar must be >= 0".into(),
        ));
    }
    if inputs.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let sqrt2 = T::from_f64(2.0).sqrt();
    let two = T::from_f64(2.0);
    let l = inputs.lipschitz;
    let t = T::from_usize(inputs.horizon);
    let noise_term = two * sqrt2 * l * inputs.sigma * inputs.ebar.sqrt() * t.sqrt();
    let drift_term = two * sqrt2 * l * l * (sqrt2 + inputs.rho) * inputs.ebar;
    Ok(noise_term + drift_term + inputs.gamma_reg / two + two * inputs.gap / inputs.eta)
}

/// Empirical `E[(B_T/η + 2η)²]`: the mean over traces of
/// `(b_running(T)/η + 2η)²`.
pub fn ebar_from_traces<T: Real>(traces: &[Trace<T>], eta: T, horizon: usize) -> Result<T> {
    if traces.is_empty() {
        return Err(Error::InvalidInput("ebar needs at least one trace".into()));
    }
    if !(eta > T::zero()) {
        return Err(Error::InvalidInput("eta must be > 0".into()));
    }
    let two = T::from_f64(2.0);
    let mut acc = NeumaierSum::new();
    for trace in traces {
        check_horizon(trace, horizon)?;
        let b = trace.b_running[horizon - 1];
        let v = b / eta + two * eta;
        acc.add(v * v);
    }
    Ok(acc.value() / T::from_usize(traces.len()))
}

/// The four step-size inequalities certified for the strong-growth schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepIneq {
    /// `η_t·L_t/2 ≤ 1`.
    StepSmoothnessProduct,
    /// `½η_t − ¼η_t²L_t − ½ρη_t²L_t ≥ η_t/8` — keeps a positive coefficient
    /// on the true-gradient term of the per-step progress bound.
    GradientCoefficientFloor,
    /// `γ_{t−1} − γ_t − γ_t²η_t ≥ 0` — the regularizer relaxes fast enough.
    RegularizerGapDominance,
    /// `η_t²L_t ≤ 6/(5L(1+ρ)(1+ρ+α√t)²)`.
    StepSquaredSmoothness,
}

pub const STEP_INEQS: [StepIneq; 4] = [
    StepIneq::StepSmoothnessProduct,
    StepIneq::GradientCoefficientFloor,
    StepIneq::RegularizerGapDominance,
    StepIneq::StepSquaredSmoothness,
];

impl StepIneq {
    pub fn name(self) -> &'static str {
        match self {
            StepIneq::StepSmoothnessProduct => "step_smoothness_product",
            StepIneq::GradientCoefficientFloor => "gradient_coefficient_floor",
            StepIneq::RegularizerGapDominance => "regularizer_gap_dominance",
            StepIneq::StepSquaredSmoothness => "step_squared_smoothness",
        }
    }

    /// Position in [`STEP_INEQS`], matching the margin-array layout of
    /// [`ScheduleCertificate`].
    pub fn index(self) -> usize {
        STEP_INEQS.iter().position(|&i| i == self).expect("member")
    }
}

impl std::fmt::Display for StepIneq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One failed inequality instance. `margin` is the (negative) slack:
/// RHS − LHS for `≤` forms, LHS for `≥ 0` forms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LemmaViolation {
    pub t: usize,
    pub inequality: StepIneq,
    pub margin: f64,
}

/// Cap on stored violations so a corrupted schedule cannot balloon the
/// report; `violation_count` is always the full count.
pub const VIOLATION_CAP: usize = 1_000;

/// Outcome of sweeping the four step-size inequalities over `t ∈ [2, t_max]`.
#[derive(Clone, Debug, Serialize)]
pub struct ScheduleCertificate {
    pub lipschitz: f64,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Multiplier applied to every η_t (1.0 = the schedule as defined;
    /// other values exist for fault injection).
    pub eta_scale: f64,
    pub t_max: usize,
    pub violations: Vec<LemmaViolation>,
    pub violation_count: usize,
    /// Margins at `t = 2`, reported separately: the inequalities are
    /// tightest at the smallest step index.
    pub t2_margins: [f64; 4],
    /// Minimum margin over the whole sweep, per inequality.
    pub min_margins: [f64; 4],
}

impl ScheduleCertificate {
    pub fn pass(&self) -> bool {
        self.violation_count == 0
    }
}

/// Sweeps the four inequalities for the schedule
/// `η_t = eta_scale/(L(1+ρ)(1+ρ+α√t))`, `α = min{σ/(L(1+ρ)), 1}`, over
/// `t ∈ [2, t_max]`.
///
/// The sweep uses the closed form `γ_t = L(1+ρ)α(√t−√(t−1))/eta_scale`,
/// valid for every `t ≥ 1` (it extends the step-size formula to `t = 0`).
/// This is deliberately *not* the run loop's `η_0 := η_1` convention, which
/// zeroes `γ_1`: the inequalities at `t = 2` compare against the closed-form
/// `γ_1 = L(1+ρ)α`. The √-difference factors are evaluated in rationalized
/// form ([`sqrt_gap`], [`sqrt_gap_decrement`]) because the third inequality's
/// true margin decays like `1/t²` — naive subtraction would drown it in
/// rounding noise long before `t = 10⁶`.
pub fn verify_sgc_schedule(
    lipschitz: f64,
    rho: f64,
    sigma: f64,
    t_max: usize,
    eta_scale: f64,
) -> Result<ScheduleCertificate> {
    if !(lipschitz > 0.0) || !(rho >= 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidInput(
            "need lipschitz > 0, rho >= 0, sigma >= 0".into(),
        ));
    }
    if t_max < 2 {
        return Err(Error::InvalidInput("t_max must be >= 2".into()));
    }
    if !(eta_scale > 0.0) {
        return Err(Error::InvalidInput("eta_scale must be > 0".into()));
    }
    let c = lipschitz * (1.0 + rho);
    let alpha = (sigma / c).min(1.0);
    let one_rho = 1.0 + rho;
    let mut cert = ScheduleCertificate {
        lipschitz,
        rho,
        sigma,
        alpha,
        eta_scale,
        t_max,
        violations: Vec::new(),
        violation_count: 0,
        t2_margins: [f64::INFINITY; 4],
        min_margins: [f64::INFINITY; 4],
    };
    for t in 2..=t_max {
        let denom = one_rho + alpha * (t as f64).sqrt();
        let eta = eta_scale / (c * denom);
        let gamma = c * alpha * sqrt_gap(t) / eta_scale;
        let l_t = lipschitz + gamma;
        let gamma_gap = c * alpha * sqrt_gap_decrement(t) / eta_scale;
        let margins = [
            1.0 - eta * l_t / 2.0,
            eta * (0.375 - (0.25 + 0.5 * rho) * eta * l_t),
            gamma_gap - gamma * gamma * eta,
            6.0 / (5.0 * c * denom * denom) - eta * eta * l_t,
        ];
        for (ineq, &m) in STEP_INEQS.iter().zip(&margins) {
            let i = ineq.index();
            if t == 2 {
                cert.t2_margins[i] = m;
            }
            cert.min_margins[i] = cert.min_margins[i].min(m);
            if m < 0.0 {
                cert.violation_count += 1;
                if cert.violations.len() < VIOLATION_CAP {
                    cert.violations.push(LemmaViolation {
                        t,
                        inequality: *ineq,
                        margin: m,
                    });
                }
            }
        }
    }
    Ok(cert)
}

/// One failed offset inequality instance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OffsetViolation {
    pub t: usize,
    pub margin: f64,
}

/// Outcome of checking `γ_{t−1} − γ_t − γ_t²η_t ≥ 0` for the decayed
/// schedule `η_t = η/(1+α√t)` over `t ∈ [1, t_max]`.
#[derive(Clone, Debug, Serialize)]
pub struct OffsetCertificate {
    pub eta: f64,
    pub alpha: f64,
    pub gamma0: f64,
    pub t_max: usize,
    pub violations: Vec<OffsetViolation>,
    pub violation_count: usize,
    /// Margin of the base case `t = 1`, which is controlled entirely by the
    /// caller's choice of `γ_0`.
    pub t1_margin: f64,
    pub min_margin: f64,
}

impl OffsetCertificate {
    pub fn pass(&self) -> bool {
        self.violation_count == 0
    }
}

/// `γ_0` large enough to make the `t = 1` base case of the offset
/// inequality hold with margin exactly 1: `α/η + α²/((1+α)η) + 1`.
pub fn decay_offset_gamma0(eta: f64, alpha: f64) -> f64 {
    alpha / eta + alpha * alpha / ((1.0 + alpha) * eta) + 1.0
}

/// Checks `γ_{t−1} − γ_t − γ_t²η_t ≥ 0` for `η_t = η/(1+α√t)`,
/// `γ_t = (α/η)(√t−√(t−1))`, with the supplied `γ_0`, over `t ∈ [1, t_max]`.
pub fn verify_decay_offsets(
    eta: f64,
    alpha: f64,
    gamma0: f64,
    t_max: usize,
) -> Result<OffsetCertificate> {
    if !(eta > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidInput("need eta > 0 and alpha >= 0".into()));
    }
    if t_max < 1 {
        return Err(Error::InvalidInput("t_max must be >= 1".into()));
    }
    let mut cert = OffsetCertificate {
        eta,
        alpha,
        gamma0,
        t_max,
        violations: Vec::new(),
        violation_count: 0,
        t1_margin: f64::INFINITY,
        min_margin: f64::INFINITY,
    };
    let a_over_eta = alpha / eta;
    for t in 1..=t_max {
        let gamma_t = a_over_eta * sqrt_gap(t);
        let eta_t = eta / (1.0 + alpha * (t as f64).sqrt());
        let gamma_prev_gap = if t == 1 {
            gamma0 - gamma_t
        } else {
            a_over_eta * sqrt_gap_decrement(t)
        };
        let margin = gamma_prev_gap - gamma_t * gamma_t * eta_t;
        if t == 1 {
            cert.t1_margin = margin;
        }
        cert.min_margin = cert.min_margin.min(margin);
        if margin < 0.0 {
            cert.violation_count += 1;
            if cert.violations.len() < VIOLATION_CAP {
                cert.violations.push(OffsetViolation { t, margin });
            }
        }
    }
    Ok(cert)
}

/// Checks `‖u+v‖² ≥ (1−λ)‖u‖² + (1−λ⁻¹)‖v‖²` (a Young-inequality split)
/// with rounding slack scaled to the magnitudes involved.
pub fn check_norm_decomposition(u: &[f64], v: &[f64], lambda: f64) -> Result<bool> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("lambda must be > 0".into()));
    }
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let sum_sq: f64 = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| (a + b) * (a + b))
        .sum();
    let u_sq = norm_sq(u);
    let v_sq = norm_sq(v);
    let rhs = (1.0 - lambda) * u_sq + (1.0 - 1.0 / lambda) * v_sq;
    let scale = sum_sq.abs().max(u_sq + v_sq * (1.0 + 1.0 / lambda)).max(1.0);
    Ok(sum_sq >= rhs - 1e-12 * scale)
}

/// Residual (RHS − LHS) of the per-step progress inequality at step `t` of a
/// recorded run:
///
/// `η_t(1−η_tL_t/2)·‖∇f_t(x_t)‖² + f_t(x_{t+1}) − f_t(x_t)
///      ≤ η_t(η_tL_t−1)·⟨∇f_t(x_t), ξ_t⟩ + (η_t²L_t/2)·‖ξ_t‖²`
///
/// where `f_t(x) = f(x) + (γ_t/2)‖x‖²`, `γ_t = 1/η_t − 1/η_{t−1}` is read
/// off the recorded step sizes (`γ_1 = 0`), and `L_t = L + γ_t`. For an
/// `L`-smooth objective the residual is non-negative up to rounding on every
/// step of every run, whatever the noise did.
pub fn check_descent_step<T: Real>(
    problem: &dyn Objective<T>,
    trace: &Trace<T>,
    t: usize,
) -> Result<T> {
    let full = trace.full.as_ref().ok_or_else(|| {
        Error::InvalidInput("descent check needs a trace with full iterates".into())
    })?;
    if t == 0 || t > trace.len() {
        return Err(Error::InvalidInput(format!(
            "step {t} outside trace of length {}",
            trace.len()
        )));
    }
    if full.xs.len() < t + 1 || full.xis.len() < t {
        return Err(Error::InvalidInput("full iterates are incomplete".into()));
    }
    let eta = trace.eta[t - 1];
    if !(eta > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "step {t} was skipped (eta = 0); no inequality to check"
        )));
    }
    let gamma = if t == 1 {
        T::zero()
    } else {
        let prev = trace.eta[t - 2];
        if !(prev > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "step {} was skipped (eta = 0); no inequality to check",
                t - 1
            )));
        }
        T::one() / eta - T::one() / prev
    };
    let l_t = problem.smoothness() + gamma;
    let x_t = &full.xs[t - 1];
    let x_next = &full.xs[t];
    let xi = &full.xis[t - 1];
    let half = T::from_f64(0.5);

    let f_reg = |x: &[T]| problem.value(x) + half * gamma * norm_sq(x);
    let mut grad_reg = problem.gradient(x_t);
    for (gi, &xi_c) in grad_reg.iter_mut().zip(x_t) {
        *gi = *gi + gamma * xi_c;
    }
    let lhs = eta * (T::one() - eta * l_t * half) * norm_sq(&grad_reg) + f_reg(x_next)
        - f_reg(x_t);
    let rhs =
        eta * (eta * l_t - T::one()) * dot(&grad_reg, xi) + half * eta * eta * l_t * norm_sq(xi);
    Ok(rhs - lhs)
}

/// Cross-seed summary of the stationarity measure at a fixed horizon.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnsembleReport {
    pub n_traces: usize,
    pub horizon: usize,
    pub mean_avg_sq_grad: f64,
    /// Nearest-rank quantiles of the per-seed stationarity measure.
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
    pub q99: f64,
    pub bound: f64,
    /// Fraction of seeds whose stationarity measure exceeds `bound`.
    pub violation_fraction: f64,
}

/// Aggregates per-seed stationarity measures: mean, nearest-rank quantiles,
/// and the fraction exceeding `bound`. All traces must cover `horizon` and
/// have equal length (seeds of one configuration).
pub fn ensemble_stats<T: Real>(
    traces: &[Trace<T>],
    horizon: usize,
    bound: f64,
) -> Result<EnsembleReport> {
    if traces.len() < 2 {
        return Err(Error::InvalidInput("ensemble needs at least 2 traces".into()));
    }
    let len0 = traces[0].len();
    let mut values = Vec::with_capacity(traces.len());
    for trace in traces {
        if trace.len() != len0 {
            return Err(Error::InvalidInput(
                "traces have mismatched lengths; ensembles must share one configuration".into(),
            ));
        }
        values.push(avg_sq_grad(trace, horizon)?.as_f64());
    }
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
    let n = sorted.len();
    let quantile = |p: f64| -> f64 {
        let rank = (p * n as f64).ceil() as usize;
        sorted[rank.clamp(1, n) - 1]
    };
    let mut acc = NeumaierSum::new();
    for &v in &values {
        acc.add(v);
    }
    let exceed = values.iter().filter(|&&v| v > bound).count();
    Ok(EnsembleReport {
        n_traces: n,
        horizon,
        mean_avg_sq_grad: acc.value() / n as f64,
        q50: quantile(0.5),
        q90: quantile(0.9),
        q95: quantile(0.95),
        q99: quantile(0.99),
        bound,
        violation_fraction: exceed as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objectives::QuadraticProblem;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_trace(grad_sq: &[f64]) -> Trace<f64> {
        let mut t = Trace::with_capacity(grad_sq.len(), false);
        for &g in grad_sq {
            t.push(StepRecord {
                eta: 0.5,
                grad_sq: g,
                f_val: 0.0,
                x_norm: 0.0,
                xi_sq: 0.0,
                b_running: 1.0,
            });
        }
        t
    }

    #[test]
    fn stationarity_average_examples() {
        assert_eq!(avg_sq_grad(&toy_trace(&[0.0, 0.0, 0.0]), 3).unwrap(), 0.0);
        assert_eq!(avg_sq_grad(&toy_trace(&[1.0, 2.0, 3.0]), 3).unwrap(), 2.0);
        assert_eq!(avg_sq_grad(&toy_trace(&[7.0, 1.0]), 1).unwrap(), 7.0);
        assert!(avg_sq_grad(&toy_trace(&[1.0]), 2).is_err());
        assert!(avg_sq_grad(&toy_trace(&[1.0]), 0).is_err());
        assert_eq!(sum_sq_grad(&toy_trace(&[1.0, 2.0, 3.0]), 3).unwrap(), 6.0);
    }

    #[test]
    fn expectation_bound_hand_values() {
        // σ = 0 collapses to 10Δ·L(1+ρ)²/T.
        let rhs = bound_expectation_rhs(&BoundInputs {
            lipschitz: 1.0,
            rho: 0.0,
            sigma: 0.0,
            gap: 1.0,
            horizon: 100,
            failure_prob: None,
        })
        .unwrap();
        assert!((rhs - 0.1f64).abs() < 1e-15);

        let rhs = bound_expectation_rhs(&BoundInputs {
            lipschitz: 1.0,
            rho: 0.0,
            sigma: 1.0,
            gap: 1.0,
            horizon: 100,
            failure_prob: None,
        })
        .unwrap();
        let expect = (10.0 + 8.0 * 11.0f64.ln()) * 11.0 / 100.0;
        assert!((rhs - expect).abs() < 1e-12);
        assert!((rhs - 3.2101478400625663).abs() < 1e-12);
    }

    #[test]
    fn expectation_bound_quadruple_horizon_halves_dominant_term() {
        let at = |horizon| {
            bound_expectation_rhs(&BoundInputs {
                lipschitz: 1.0,
                rho: 0.0,
                sigma: 1.0,
                gap: 100.0,
                horizon,
                failure_prob: None,
            })
            .unwrap()
        };
        let ratio: f64 = at(10_000) / at(40_000);
        assert!((ratio / 2.0 - 1.0).abs() <= 0.1, "ratio {ratio}");
    }

    #[test]
    fn highprob_bound_hand_values() {
        let rhs = bound_highprob_rhs(&BoundInputs {
            lipschitz: 2.0,
            rho: 0.0,
            sigma: 0.0,
            gap: 1.0,
            horizon: 100,
            failure_prob: Some(0.5),
        })
        .unwrap();
        assert!((rhs - 0.12f64).abs() < 1e-15);

        let rhs = bound_highprob_rhs(&BoundInputs {
            lipschitz: 1.0,
            rho: 0.0,
            sigma: 1.0,
            gap: 1.0,
            horizon: 100,
            failure_prob: Some(0.1),
        })
        .unwrap();
        let expect = (6.0 + 36.0 * 11.0f64.ln() + 18.0 * 10.0f64.ln()) * 11.0 / 100.0;
        assert!((rhs - expect).abs() < 1e-12);
        assert!((rhs - 14.714783764409757).abs() < 1e-12);

        // Smaller δ strictly increases the bound.
        let tighter = bound_highprob_rhs(&BoundInputs {
            failure_prob: Some(0.01),
            ..BoundInputs {
                lipschitz: 1.0,
                rho: 0.0,
                sigma: 1.0,
                gap: 1.0,
                horizon: 100,
                failure_prob: None,
            }
        })
        .unwrap();
        assert!(tighter > rhs);

        assert!(bound_highprob_rhs(&BoundInputs {
            lipschitz: 1.0,
            rho: 0.0,
            sigma: 1.0,
            gap: 1.0,
            horizon: 100,
            failure_prob: Some(1.0),
        })
        .is_err());
    }

    #[test]
    fn ada_bound_hand_values() {
        let base = AdaBoundInputs {
            lipschitz: 1.0,
            rho: 0.0,
            sigma: 1.0,
            eta: 1.0,
            gamma_reg: 0.0,
            gap: 1.0,
            ebar: 4.0,
            horizon: 100,
        };
        let rhs = bound_ada_rhs(&base).unwrap();
        let expect = 40.0 * 2.0f64.sqrt() + 16.0 + 2.0;
        assert!((rhs - expect).abs() < 1e-12);
        assert!((rhs - 74.5685424949238).abs() < 1e-10);

        // σ = 0 removes the √T term entirely.
        let no_noise = bound_ada_rhs(&AdaBoundInputs { sigma: 0.0, ..base }).unwrap();
        let same_at_bigger_t =
            bound_ada_rhs(&AdaBoundInputs { sigma: 0.0, horizon: 10_000, ..base }).unwrap();
        assert_eq!(no_noise, same_at_bigger_t);

        // Larger Ebar gives a larger bound.
        let bigger = bound_ada_rhs(&AdaBoundInputs { ebar: 9.0, ..base }).unwrap();
        assert!(bigger > rhs);
    }

    #[test]
    fn bounds_are_monotone_in_gap_and_sigma() {
        for &(gap, sigma) in &[(0.5, 0.5), (1.0, 1.0), (2.0, 3.0)] {
            let mk = |gap, sigma| BoundInputs {
                lipschitz: 2.0,
                rho: 1.0,
                sigma,
                gap,
                horizon: 1_000,
                failure_prob: Some(0.05),
            };
            let base_e = bound_expectation_rhs(&mk(gap, sigma)).unwrap();
            let base_h = bound_highprob_rhs(&mk(gap, sigma)).unwrap();
            assert!(bound_expectation_rhs(&mk(gap * 2.0, sigma)).unwrap() > base_e);
            assert!(bound_expectation_rhs(&mk(gap, sigma * 2.0)).unwrap() > base_e);
            assert!(bound_highprob_rhs(&mk(gap * 2.0, sigma)).unwrap() > base_h);
            assert!(bound_highprob_rhs(&mk(gap, sigma * 2.0)).unwrap() > base_h);
        }
    }

    #[test]
    fn ebar_from_traces_hand_value() {
        let mut t1 = toy_trace(&[1.0, 1.0]);
        t1.b_running = vec![1.0, 2.0];
        let mut t2 = toy_trace(&[1.0, 1.0]);
        t2.b_running = vec![1.0, 4.0];
        // η = 1: values (2/1 + 2)² = 16 and (4 + 2)² = 36, mean 26.
        let e = ebar_from_traces(&[t1, t2], 1.0, 2).unwrap();
        assert_eq!(e, 26.0);
    }

    #[test]
    fn schedule_sweep_is_clean_except_step_squared_smoothness() {
        // A parameter cell with α = 1: the first three inequalities hold
        // everywhere; the fourth genuinely fails for small t (its stated
        // constant is too tight there) and nowhere else.
        let cert = verify_sgc_schedule(1.0, 0.0, 1.0, 100_000, 1.0).unwrap();
        assert!(!cert.pass());
        assert!(cert
            .violations
            .iter()
            .all(|v| v.inequality == StepIneq::StepSquaredSmoothness && (2..=6).contains(&v.t)));
        assert_eq!(cert.violation_count, 5);
        for ineq in [
            StepIneq::StepSmoothnessProduct,
            StepIneq::GradientCoefficientFloor,
            StepIneq::RegularizerGapDominance,
        ] {
            assert!(cert.min_margins[ineq.index()] >= 0.0, "{ineq}");
        }
        // Hand value at t = 2: η₂²L₂ = (√2−1)²·(1+(√2−1)) vs 6/(5(1+√2)²).
        let eta2 = 1.0 / (1.0 + 2.0f64.sqrt());
        let gamma2 = 2.0f64.sqrt() - 1.0;
        let lhs = eta2 * eta2 * (1.0 + gamma2);
        let rhs = 6.0 / (5.0 * (1.0 + 2.0f64.sqrt()).powi(2));
        let expect = rhs - lhs;
        assert!(expect < 0.0);
        assert!((cert.t2_margins[StepIneq::StepSquaredSmoothness.index()] - expect).abs() < 1e-14);
    }

    #[test]
    fn schedule_sweep_clean_cell_has_no_violations() {
        // α < 1 keeps even the fourth inequality comfortable.
        let cert = verify_sgc_schedule(10.0, 5.0, 0.1, 100_000, 1.0).unwrap();
        assert!(cert.pass(), "{:?}", cert.violations.len());
        // σ = 0 degenerate path (constant schedule, γ ≡ 0).
        let cert = verify_sgc_schedule(2.0, 1.0, 0.0, 1_000, 1.0).unwrap();
        assert!(cert.pass());
    }

    #[test]
    fn corrupted_schedule_is_detected() {
        let cert = verify_sgc_schedule(1.0, 0.0, 1.0, 10_000, 2.0).unwrap();
        assert!(!cert.pass());
        // Doubling every η breaks the fourth inequality at every t.
        assert!(cert.violation_count >= 9_999);
        assert_eq!(cert.violations.len(), VIOLATION_CAP);
    }

    #[test]
    fn offset_inequality_with_recipe_gamma0() {
        let gamma0 = decay_offset_gamma0(1.0, 1.0);
        let cert = verify_decay_offsets(1.0, 1.0, gamma0, 100_000).unwrap();
        assert!(cert.pass());
        assert!((cert.t1_margin - 1.0).abs() < 1e-12);
        assert!(cert.min_margin >= 0.0);

        // γ_0 = 0 breaks the base case.
        let cert = verify_decay_offsets(1.0, 1.0, 0.0, 10).unwrap();
        assert!(!cert.pass());
        assert_eq!(cert.violations[0].t, 1);

        // α = 0: γ_t ≡ 0, inequality holds with equality.
        let cert = verify_decay_offsets(1.0, 0.0, decay_offset_gamma0(1.0, 0.0), 1_000).unwrap();
        assert!(cert.pass());
    }

    #[test]
    fn norm_decomposition_examples() {
        assert!(check_norm_decomposition(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap());
        assert!(check_norm_decomposition(&[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap());
        assert!(check_norm_decomposition(&[0.0], &[0.0], 3.0).unwrap());
        assert!(check_norm_decomposition(&[1.0], &[1.0], 0.0).is_err());
        assert!(check_norm_decomposition(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn norm_decomposition_randomized_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(8_675_309);
        for _ in 0..100_000 {
            let d = rng.random_range(1..6usize);
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            let lambda = rng.random_range(1e-3..1e3f64);
            assert!(check_norm_decomposition(&u, &v, lambda).unwrap());
        }
    }

    /// Builds the 1-D shifted quadratic f(x) = ½(x−1)² with L = 1, f* = 0.
    fn shifted_quadratic() -> QuadraticProblem<f64> {
        QuadraticProblem::new(Matrix::identity(1), vec![1.0], 0.5).unwrap()
    }

    fn hand_trace(xs: Vec<Vec<f64>>, xis: Vec<Vec<f64>>, etas: Vec<f64>) -> Trace<f64> {
        let n = etas.len();
        let mut t = Trace::with_capacity(n, true);
        for &eta in &etas {
            t.push(StepRecord {
                eta,
                grad_sq: 0.0,
                f_val: 0.0,
                x_norm: 0.0,
                xi_sq: 0.0,
                b_running: 0.0,
            });
        }
        t.full = Some(FullIterates { xs, xis });
        t
    }

    #[test]
    fn descent_residual_nonnegative_on_exact_run() {
        // Constant η = 0.5 from x₁ = 0: x₂ = 0.5, x₃ = 0.75.
        let p = shifted_quadratic();
        let trace = hand_trace(
            vec![vec![0.0], vec![0.5], vec![0.75]],
            vec![vec![0.0], vec![0.0]],
            vec![0.5, 0.5],
        );
        for t in 1..=2 {
            let r = check_descent_step(&p, &trace, t).unwrap();
            assert!(r >= -1e-10, "t = {t}: residual {r}");
        }
    }

    #[test]
    fn descent_residual_zero_at_unit_step_product() {
        // η·L_t = 1 with ξ = 0: the inequality holds with equality.
        let p = shifted_quadratic();
        let trace = hand_trace(vec![vec![0.0], vec![1.0]], vec![vec![0.0]], vec![1.0]);
        let r = check_descent_step(&p, &trace, 1).unwrap();
        assert!(r.abs() <= 1e-15);
    }

    #[test]
    fn descent_check_requires_full_iterates_and_valid_step() {
        let p = shifted_quadratic();
        let bare = toy_trace(&[1.0]);
        assert!(check_descent_step(&p, &bare, 1).is_err());
        let trace = hand_trace(vec![vec![0.0], vec![0.5]], vec![vec![0.0]], vec![0.5]);
        assert!(check_descent_step(&p, &trace, 0).is_err());
        assert!(check_descent_step(&p, &trace, 2).is_err());
    }

    #[test]
    fn descent_check_presumes_smoothness() {
        // |x| with a nominal smoothness constant: stepping across the kink
        // can violate the inequality — the check is only meaningful for
        // problems whose declared L actually bounds the Hessian.
        struct AbsValue;
        impl Objective<f64> for AbsValue {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                x[0].abs()
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0].signum()]
            }
            fn smoothness(&self) -> f64 {
                1.0
            }
            fn f_star(&self) -> f64 {
                0.0
            }
            fn minimizer(&self) -> Option<&[f64]> {
                None
            }
        }
        let trace = hand_trace(vec![vec![0.6], vec![-0.4]], vec![vec![0.0]], vec![1.0]);
        let r = check_descent_step(&AbsValue, &trace, 1).unwrap();
        assert!(r < 0.0, "kink crossing should violate the smooth bound: {r}");
    }

    #[test]
    fn ensemble_stats_examples() {
        let t1 = toy_trace(&[4.0, 4.0]);
        let traces = vec![t1.clone(), t1.clone(), t1.clone()];
        let rep = ensemble_stats(&traces, 2, 5.0).unwrap();
        assert_eq!(rep.violation_fraction, 0.0);
        assert_eq!(rep.mean_avg_sq_grad, 4.0);
        assert_eq!(rep.q50, 4.0);
        assert_eq!(rep.q99, 4.0);

        let rep = ensemble_stats(&traces, 2, 3.0).unwrap();
        assert_eq!(rep.violation_fraction, 1.0);

        let rep = ensemble_stats(&traces, 2, f64::INFINITY).unwrap();
        assert_eq!(rep.violation_fraction, 0.0);

        assert!(ensemble_stats(&traces[..1], 2, 1.0).is_err());
        let mixed = vec![t1.clone(), toy_trace(&[1.0])];
        assert!(ensemble_stats(&mixed, 1, 1.0).is_err());
    }

    #[test]
    fn ensemble_quantiles_use_nearest_rank() {
        let traces: Vec<Trace<f64>> = (1..=10)
            .map(|k| toy_trace(&[k as f64]))
            .collect();
        let rep = ensemble_stats(&traces, 1, f64::INFINITY).unwrap();
        // Nearest-rank over {1..10}: ⌈0.5·10⌉ = 5, ⌈0.9·10⌉ = 9, etc.
        assert_eq!(rep.q50, 5.0);
        assert_eq!(rep.q90, 9.0);
        assert_eq!(rep.q95, 10.0);
        assert_eq!(rep.q99, 10.0);
        assert_eq!(rep.mean_avg_sq_grad, 5.5);
    }

    proptest! {
        #[test]
        fn norm_decomposition_property(
            u in proptest::collection::vec(-100.0f64..100.0, 1..8),
            seed in 0u64..1_000,
            lambda in 1e-3f64..1e3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..u.len()).map(|_| rng.random_range(-100.0..100.0)).collect();
            prop_assert!(check_norm_decomposition(&u, &v, lambda).unwrap());
        }
    }
}
