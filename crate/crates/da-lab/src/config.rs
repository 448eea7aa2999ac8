//! Declarative experiment configuration: one TOML document per experiment,
//! parsed strictly (unknown keys are errors) and resolved into the domain
//! objects the runners consume. The CLI layer works in `f64`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::objectives::{make_least_squares, Objective, Problem, QuadraticProblem, RosenbrockProblem};
use crate::optimizers::{Algorithm, RunConfig};
use crate::schedules::ScheduleParams;

/// Which runner a config document drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Run,
    Ensemble,
    Compare,
    VerifyLemmas,
    Report,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Run => "run",
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::Compare => "compare",
            ExperimentKind::VerifyLemmas => "verify_lemmas",
            ExperimentKind::Report => "report",
        })
    }
}

/// Contiguous block of seeds for ensemble/compare experiments.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: usize,
}

impl SeedRange {
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count as u64).map(move |k| self.start + k)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic(QuadraticCfg),
    LeastSquares(LeastSquaresCfg),
    Rosenbrock(RosenbrockCfg),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticCfg {
    pub dim: usize,
    pub condition: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeastSquaresCfg {
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    #[serde(default)]
    pub label_noise: f64,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosenbrockCfg {}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Exact(ExactCfg),
    AdditiveGaussian(SigmaCfg),
    StrongGrowth(StrongGrowthCfg),
    BoundedSphere(SigmaCfg),
    MiniBatch(MiniBatchCfg),
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactCfg {}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaCfg {
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongGrowthCfg {
    pub rho: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiniBatchCfg {
    pub batch_size: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant(ConstantCfg),
    Sgc(SgcCfg),
    HighProb(HighProbCfg),
    AdagradNorm(AdagradNormCfg),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantCfg {
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgcCfg {
    /// Defaults to the problem's certified smoothness constant.
    pub lipschitz: Option<f64>,
    pub rho: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighProbCfg {
    /// Defaults to the problem's certified smoothness constant.
    pub lipschitz: Option<f64>,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdagradNormCfg {
    pub eta: f64,
    #[serde(default)]
    pub gamma_reg: f64,
}

/// Parameters for bound evaluation in summaries.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    /// Failure probability for the high-probability bound (default 0.05).
    pub delta: Option<f64>,
}

fn default_lipschitz_grid() -> Vec<f64> {
    vec![0.5, 1.0, 10.0]
}
fn default_rho_grid() -> Vec<f64> {
    vec![0.0, 1.0, 5.0]
}
fn default_sigma_grid() -> Vec<f64> {
    vec![0.0, 0.1, 1.0, 10.0]
}
fn default_t_max() -> usize {
    1_000_000
}
fn default_offset_eta_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}
fn default_offset_alpha_grid() -> Vec<f64> {
    vec![0.0, 0.1, 0.5, 1.0]
}
fn default_norm_trials() -> usize {
    100_000
}
fn default_norm_seed() -> u64 {
    2_718_281_828
}
fn default_eta_scale() -> f64 {
    1.0
}

/// Grid and trial counts for the inequality sweeps.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_lipschitz_grid")]
    pub lipschitz_grid: Vec<f64>,
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_offset_eta_grid")]
    pub offset_eta_grid: Vec<f64>,
    #[serde(default = "default_offset_alpha_grid")]
    pub offset_alpha_grid: Vec<f64>,
    #[serde(default = "default_norm_trials")]
    pub norm_trials: usize,
    #[serde(default = "default_norm_seed")]
    pub norm_seed: u64,
    /// Multiplier on every η_t — 1.0 verifies the schedule as defined;
    /// other values exist for fault injection.
    #[serde(default = "default_eta_scale")]
    pub eta_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            lipschitz_grid: default_lipschitz_grid(),
            rho_grid: default_rho_grid(),
            sigma_grid: default_sigma_grid(),
            t_max: default_t_max(),
            offset_eta_grid: default_offset_eta_grid(),
            offset_alpha_grid: default_offset_alpha_grid(),
            norm_trials: default_norm_trials(),
            norm_seed: default_norm_seed(),
            eta_scale: default_eta_scale(),
        }
    }
}

/// One experiment, declaratively. Field applicability depends on `kind`;
/// [`ExperimentConfig::validate`] reports every missing or inconsistent
/// field at once.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub out_dir: Option<String>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<SeedRange>,
    pub algorithm: Option<Algorithm>,
    pub algorithms: Option<Vec<Algorithm>>,
    #[serde(default)]
    pub record_full_iterates: bool,
    /// Horizons at which summaries snapshot metrics; defaults to `[horizon]`.
    pub checkpoints: Option<Vec<usize>>,
    pub problem: Option<ProblemConfig>,
    pub noise: Option<NoiseConfig>,
    pub schedule: Option<ScheduleConfig>,
    pub bound: Option<BoundConfig>,
    pub verify: Option<VerifyConfig>,
    /// Existing trace CSV to summarize (report only).
    pub trace: Option<String>,
    /// Monte Carlo sample count for the oracle checkers (report only).
    pub n_samples: Option<usize>,
}

/// Parses a TOML experiment document. Unknown or misspelled keys are
/// rejected with the offending key named.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Structural validation; returns every problem found, not just the
    /// first.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let mut need = |field: &str, present: bool| {
            if !present {
                errs.push(format!("{}: missing required field `{field}`", self.kind));
            }
        };
        match self.kind {
            ExperimentKind::Run => {
                need("horizon", self.horizon.is_some());
                need("seed", self.seed.is_some());
                need("algorithm", self.algorithm.is_some());
                need("problem", self.problem.is_some());
                need("noise", self.noise.is_some());
                need("schedule", self.schedule.is_some());
            }
            ExperimentKind::Ensemble => {
                need("horizon", self.horizon.is_some());
                need("seeds", self.seeds.is_some());
                need("algorithm", self.algorithm.is_some());
                need("problem", self.problem.is_some());
                need("noise", self.noise.is_some());
                need("schedule", self.schedule.is_some());
            }
            ExperimentKind::Compare => {
                need("horizon", self.horizon.is_some());
                need(
                    "seed (or seeds)",
                    self.seed.is_some() || self.seeds.is_some(),
                );
                need("algorithms", self.algorithms.is_some());
                need("problem", self.problem.is_some());
                need("noise", self.noise.is_some());
                need("schedule", self.schedule.is_some());
            }
            ExperimentKind::VerifyLemmas => {}
            ExperimentKind::Report => {
                need("problem", self.problem.is_some());
            }
        }
        if let Some(h) = self.horizon {
            if h == 0 {
                errs.push("horizon must be >= 1".into());
            }
        }
        if let Some(seeds) = &self.seeds {
            if seeds.count == 0 {
                errs.push("seeds.count must be >= 1".into());
            }
        }
        if let Some(algos) = &self.algorithms {
            if self.kind == ExperimentKind::Compare && algos.len() < 2 {
                errs.push("compare needs at least 2 algorithms".into());
            }
        }
        if let Some(cps) = &self.checkpoints {
            if cps.is_empty() {
                errs.push("checkpoints must be non-empty when given".into());
            }
            if cps.contains(&0) {
                errs.push("checkpoints must be >= 1".into());
            }
            if cps.windows(2).any(|w| w[0] >= w[1]) {
                errs.push("checkpoints must be strictly increasing".into());
            }
            if let Some(h) = self.horizon {
                if cps.iter().any(|&c| c > h) {
                    errs.push("checkpoints must not exceed horizon".into());
                }
            }
        }
        // Algorithm/schedule admissibility is decidable from the raw config.
        if let Some(schedule) = &self.schedule {
            let adaptive = matches!(schedule, ScheduleConfig::AdagradNorm(_));
            let mut check = |algo: Algorithm| match (algo, adaptive) {
                (Algorithm::AdaDa, false) => {
                    errs.push("ada_da requires the adagrad_norm schedule".into())
                }
                (a, true) if a != Algorithm::AdaDa => errs.push(format!(
                    "the adagrad_norm schedule requires ada_da, not {a}"
                )),
                _ => {}
            };
            if let Some(a) = self.algorithm {
                check(a);
            }
            for &a in self.algorithms.iter().flatten() {
                check(a);
            }
        }
        if let Some(v) = &self.verify {
            if v.lipschitz_grid.is_empty() || v.rho_grid.is_empty() || v.sigma_grid.is_empty() {
                errs.push("verify grids must be non-empty".into());
            }
            if v.t_max < 2 {
                errs.push("verify.t_max must be >= 2".into());
            }
            if !(v.eta_scale > 0.0) {
                errs.push("verify.eta_scale must be > 0".into());
            }
        }
        if let Some(n) = self.n_samples {
            if n < 1_000 {
                errs.push("n_samples must be >= 1000".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    pub fn resolve_problem(&self) -> Result<Problem<f64>> {
        let cfg = self
            .problem
            .as_ref()
            .ok_or_else(|| Error::Config("missing [problem] block".into()))?;
        Ok(match cfg {
            ProblemConfig::Quadratic(q) => {
                Problem::Quadratic(QuadraticProblem::conditioned(q.dim, q.condition)?)
            }
            ProblemConfig::LeastSquares(ls) => Problem::LeastSquares(make_least_squares(
                ls.seed,
                ls.n,
                ls.dim,
                ls.label_noise,
            )?),
            ProblemConfig::Rosenbrock(_) => Problem::Rosenbrock(RosenbrockProblem::new()),
        })
    }

    pub fn resolve_noise(&self) -> Result<NoiseModel<f64>> {
        let cfg = self
            .noise
            .as_ref()
            .ok_or_else(|| Error::Config("missing [noise] block".into()))?;
        let model = match cfg {
            NoiseConfig::Exact(_) => NoiseModel::Exact,
            NoiseConfig::AdditiveGaussian(c) => NoiseModel::AdditiveGaussian { sigma: c.sigma },
            NoiseConfig::StrongGrowth(c) => NoiseModel::StrongGrowth {
                rho: c.rho,
                sigma: c.sigma,
            },
            NoiseConfig::BoundedSphere(c) => NoiseModel::BoundedSphere { sigma: c.sigma },
            NoiseConfig::MiniBatch(c) => NoiseModel::MiniBatch {
                batch_size: c.batch_size,
            },
        };
        model.validate()?;
        Ok(model)
    }

    /// Resolves the schedule, filling an omitted `lipschitz` with the
    /// problem's certified smoothness constant.
    pub fn resolve_schedule(&self, problem: &Problem<f64>) -> Result<ScheduleParams<f64>> {
        let cfg = self
            .schedule
            .as_ref()
            .ok_or_else(|| Error::Config("missing [schedule] block".into()))?;
        let params = match cfg {
            ScheduleConfig::Constant(c) => ScheduleParams::Constant { eta: c.eta },
            ScheduleConfig::Sgc(c) => ScheduleParams::Sgc {
                lipschitz: c.lipschitz.unwrap_or_else(|| problem.smoothness()),
                rho: c.rho,
                sigma: c.sigma,
            },
            ScheduleConfig::HighProb(c) => ScheduleParams::HighProb {
                lipschitz: c.lipschitz.unwrap_or_else(|| problem.smoothness()),
                sigma: c.sigma,
            },
            ScheduleConfig::AdagradNorm(c) => ScheduleParams::AdaGradNorm {
                eta: c.eta,
                gamma_reg: c.gamma_reg,
            },
        };
        params.validate()?;
        Ok(params)
    }

    /// Assembles the full run configuration for `seed`.
    pub fn resolve_run(&self, problem: &Problem<f64>, seed: u64) -> Result<RunConfig<f64>> {
        let cfg = RunConfig {
            horizon: self
                .horizon
                .ok_or_else(|| Error::Config("missing `horizon`".into()))?,
            seed,
            algorithm: self
                .algorithm
                .ok_or_else(|| Error::Config("missing `algorithm`".into()))?,
            noise: self.resolve_noise()?,
            schedule: self.resolve_schedule(problem)?,
            record_full_iterates: self.record_full_iterates,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checkpoints to snapshot, defaulting to the final horizon.
    pub fn checkpoints_or_default(&self) -> Vec<usize> {
        match (&self.checkpoints, self.horizon) {
            (Some(c), _) => c.clone(),
            (None, Some(h)) => vec![h],
            (None, None) => Vec::new(),
        }
    }
}
