//! Command layer behind the `da-lab` binary. Each `cmd_*` function consumes
//! a validated [`ExperimentConfig`], writes its artifacts into an output
//! directory, and returns the process exit code.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 divergence,
//! 3 a verified inequality or checked assumption fails.
//!
//! Trace CSVs are byte-deterministic: fields carry 17 significant digits
//! (`{:.16e}`), enough for `f64` round trips, so re-running a seeded
//! experiment reproduces the file exactly.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    avg_sq_grad, bound_ada_rhs, bound_expectation_rhs, bound_highprob_rhs,
    check_norm_decomposition, decay_offset_gamma0, ebar_from_traces, ensemble_stats,
    verify_decay_offsets, verify_sgc_schedule, AdaBoundInputs, BoundInputs, EnsembleReport,
    OffsetCertificate, ScheduleCertificate, StepRecord, Trace,
};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::noise::{check_growth_bound, check_unbiased, NoiseModel};
use crate::objectives::{Objective, Problem};
use crate::optimizers::{run, run_paired, Algorithm, RunConfig};
use crate::schedules::ScheduleParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Maps an error to the documented process exit code.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

/// Environment variable consulted for the output directory when neither the
/// command line nor the config names one.
pub const OUT_DIR_ENV: &str = "DA_LAB_OUT";

/// Output directory precedence: `--out` flag, then the config's `out_dir`,
/// then `$DA_LAB_OUT`, then the current directory.
pub fn resolve_out_dir(cli_out: Option<&Path>, cfg_out_dir: Option<&str>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(p) = cfg_out_dir {
        return PathBuf::from(p);
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV) {
        return PathBuf::from(p);
    }
    PathBuf::from(".")
}

fn ensure_out_dir(cli_out: Option<&Path>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = resolve_out_dir(cli_out, cfg.out_dir.as_deref());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn expect_kind(cfg: &ExperimentConfig, want: ExperimentKind) -> Result<()> {
    if cfg.kind != want {
        return Err(Error::Config(format!(
            "config kind is `{}`, but this subcommand expects `{want}`",
            cfg.kind
        )));
    }
    Ok(())
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Trace CSV

pub const TRACE_HEADER: &str = "t,eta,grad_sq,f_val,x_norm,xi_sq,b_running";

/// Renders a trace as CSV. Deterministic: equal traces produce identical
/// bytes.
pub fn trace_to_csv(trace: &Trace<f64>) -> String {
    let mut out = String::with_capacity(64 + 160 * trace.len());
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in 1..=trace.len() {
        let r = trace.record(t);
        out.push_str(&format!(
            "{t},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.eta, r.grad_sq, r.f_val, r.x_norm, r.xi_sq, r.b_running
        ));
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &Trace<f64>) -> Result<()> {
    fs::write(path, trace_to_csv(trace))?;
    Ok(())
}

/// Parses a trace CSV produced by [`trace_to_csv`]. The scalar columns
/// round-trip exactly; full iterates are not stored in CSV form.
pub fn parse_trace_csv(text: &str) -> Result<Trace<f64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty trace CSV".into()))?;
    if header != TRACE_HEADER {
        return Err(Error::InvalidInput(format!(
            "unexpected trace header `{header}` (want `{TRACE_HEADER}`)"
        )));
    }
    let mut trace = Trace::with_capacity(0, false);
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = i + 2; // 1-based line number in the file
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::InvalidInput(format!(
                "line {row}: expected 7 fields, got {}",
                fields.len()
            )));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {row}: bad step index `{}`", fields[0])))?;
        if t != i + 1 {
            return Err(Error::InvalidInput(format!(
                "line {row}: step indices must run 1,2,… (got {t})"
            )));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("line {row}: bad float `{}`", fields[k])))
        };
        trace.push(StepRecord {
            eta: num(1)?,
            grad_sq: num(2)?,
            f_val: num(3)?,
            x_norm: num(4)?,
            xi_sq: num(5)?,
            b_running: num(6)?,
        });
    }
    Ok(trace)
}

pub fn read_trace_csv(path: &Path) -> Result<Trace<f64>> {
    parse_trace_csv(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Bound selection

const DEFAULT_DELTA: f64 = 0.05;

/// `f(0) − f*`: the initial objective gap of a run started at the origin.
fn initial_gap(problem: &Problem<f64>) -> f64 {
    let x0 = vec![0.0; problem.dim()];
    problem.value(&x0) - problem.f_star()
}

/// Evaluates the guarantee matching `schedule` at horizon `t`, given the
/// traces it should cover (the adaptive bound needs the empirical
/// `E[(B_T/η + 2η)²]` across them, and the noise model's declared growth
/// parameters). Returns `None` when no guarantee applies (constant step
/// size, or an adaptive schedule with no noise model to supply `(ρ, σ)`).
/// Every bound is reported in average form — an upper bound for
/// `(1/T)Σ‖∇f(x_t)‖²`.
fn bound_at(
    schedule: &ScheduleParams<f64>,
    problem: &Problem<f64>,
    noise: Option<&NoiseModel<f64>>,
    delta: f64,
    gap: f64,
    traces: &[Trace<f64>],
    t: usize,
) -> Result<Option<(&'static str, f64)>> {
    match *schedule {
        ScheduleParams::Constant { .. } => Ok(None),
        ScheduleParams::Sgc { lipschitz, rho, sigma } => {
            let b = bound_expectation_rhs(&BoundInputs {
                lipschitz,
                rho,
                sigma,
                gap,
                horizon: t,
                failure_prob: None,
            })?;
            Ok(Some(("expectation", b)))
        }
        ScheduleParams::HighProb { lipschitz, sigma } => {
            let b = bound_highprob_rhs(&BoundInputs {
                lipschitz,
                rho: 0.0,
                sigma,
                gap,
                horizon: t,
                failure_prob: Some(delta),
            })?;
            Ok(Some(("high_probability", b)))
        }
        ScheduleParams::AdaGradNorm { eta, gamma_reg } => {
            let Some(noise) = noise else { return Ok(None) };
            let (rho, sigma) = noise.declared_growth_params(problem)?;
            let ebar = ebar_from_traces(traces, eta, t)?;
            let sum_bound = bound_ada_rhs(&AdaBoundInputs {
                lipschitz: problem.smoothness(),
                rho,
                sigma,
                eta,
                gamma_reg,
                gap,
                ebar,
                horizon: t,
            })?;
            Ok(Some(("adaptive", sum_bound / t as f64)))
        }
    }
}

// ---------------------------------------------------------------------------
// run

#[derive(Serialize)]
struct CheckpointSummary {
    t: usize,
    avg_sq_grad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
}

#[derive(Serialize)]
struct RunSummary {
    kind: &'static str,
    algorithm: &'static str,
    horizon: usize,
    seed: u64,
    dim: usize,
    lipschitz: f64,
    gap: f64,
    bound_kind: Option<&'static str>,
    /// Adaptive steps skipped because no gradient mass had arrived yet.
    skipped_steps: usize,
    checkpoints: Vec<CheckpointSummary>,
    final_f: f64,
    final_b: f64,
}

fn summarize_run(
    cfg: &ExperimentConfig,
    problem: &Problem<f64>,
    run_cfg: &RunConfig<f64>,
    trace: &Trace<f64>,
) -> Result<RunSummary> {
    let gap = initial_gap(problem);
    let delta = cfg.bound.as_ref().and_then(|b| b.delta).unwrap_or(DEFAULT_DELTA);
    let traces = std::slice::from_ref(trace);
    let mut bound_kind = None;
    let mut checkpoints = Vec::new();
    for &t in &cfg.checkpoints_or_default() {
        let bound = bound_at(
            &run_cfg.schedule,
            problem,
            Some(&run_cfg.noise),
            delta,
            gap,
            traces,
            t,
        )?;
        bound_kind = bound.map(|(k, _)| k).or(bound_kind);
        checkpoints.push(CheckpointSummary {
            t,
            avg_sq_grad: avg_sq_grad(trace, t)?,
            bound: bound.map(|(_, v)| v),
        });
    }
    Ok(RunSummary {
        kind: "run",
        algorithm: run_cfg.algorithm.name(),
        horizon: run_cfg.horizon,
        seed: run_cfg.seed,
        dim: problem.dim(),
        lipschitz: problem.smoothness(),
        gap,
        bound_kind,
        skipped_steps: trace.eta.iter().filter(|&&e| e == 0.0).count(),
        checkpoints,
        final_f: trace.f_val[trace.len() - 1],
        final_b: trace.b_running[trace.len() - 1],
    })
}

/// Runs one seeded trajectory; writes `trace.csv` and `summary.json`.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<i32> {
    expect_kind(cfg, ExperimentKind::Run)?;
    let out = ensure_out_dir(out_override, cfg)?;
    let problem = cfg.resolve_problem()?;
    let seed = seed_override
        .or(cfg.seed)
        .ok_or_else(|| Error::Config("run needs a seed".into()))?;
    let run_cfg = cfg.resolve_run(&problem, seed)?;
    let trace = run(&problem, &run_cfg)?;
    write_trace_csv(&out.join("trace.csv"), &trace)?;
    let summary = summarize_run(cfg, &problem, &run_cfg, &trace)?;
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "run: {} steps of {} (seed {seed}); wrote {} and {}",
        trace.len(),
        run_cfg.algorithm,
        out.join("trace.csv").display(),
        out.join("summary.json").display()
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// ensemble

#[derive(Serialize)]
struct EnsembleCheckpoint {
    t: usize,
    report: EnsembleReport,
}

#[derive(Serialize)]
struct EnsembleSummary {
    kind: &'static str,
    algorithm: &'static str,
    horizon: usize,
    seed_start: u64,
    n_seeds: usize,
    n_diverged: usize,
    diverged_seeds: Vec<u64>,
    bound_kind: Option<&'static str>,
    delta: f64,
    checkpoints: Vec<EnsembleCheckpoint>,
}

/// Runs one configuration across a seed range in parallel; writes per-seed
/// metrics (`seeds.csv`) and quantile/bound aggregates (`ensemble.json`).
/// Divergent seeds are recorded rather than fatal; exit code 2 signals that
/// more than 10% of them diverged.
pub fn cmd_ensemble(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<i32> {
    expect_kind(cfg, ExperimentKind::Ensemble)?;
    let out = ensure_out_dir(out_override, cfg)?;
    let problem = cfg.resolve_problem()?;
    let seeds = cfg
        .seeds
        .ok_or_else(|| Error::Config("ensemble needs a [seeds] block".into()))?;
    let algorithm = cfg
        .algorithm
        .ok_or_else(|| Error::Config("ensemble needs `algorithm`".into()))?;
    let horizon = cfg.horizon.unwrap_or(0);
    // Validate once up front so a bad configuration fails before the fan-out.
    cfg.resolve_run(&problem, seeds.start)?;

    let seed_list: Vec<u64> = seeds.iter().collect();
    let results: Vec<(u64, Result<Trace<f64>>)> = seed_list
        .par_iter()
        .map(|&seed| {
            let r = cfg
                .resolve_run(&problem, seed)
                .and_then(|rc| run(&problem, &rc));
            (seed, r)
        })
        .collect();

    let mut diverged_seeds = Vec::new();
    let mut kept: Vec<(u64, Trace<f64>)> = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(trace) => kept.push((seed, trace)),
            Err(Error::Diverged { .. }) => diverged_seeds.push(seed),
            Err(e) => return Err(e),
        }
    }

    let mut seeds_csv = String::from("seed,avg_sq_grad,final_f,b_running\n");
    for (seed, trace) in &kept {
        seeds_csv.push_str(&format!(
            "{seed},{:.16e},{:.16e},{:.16e}\n",
            avg_sq_grad(trace, horizon)?,
            trace.f_val[trace.len() - 1],
            trace.b_running[trace.len() - 1]
        ));
    }
    fs::write(out.join("seeds.csv"), seeds_csv)?;

    let traces: Vec<Trace<f64>> = kept.into_iter().map(|(_, t)| t).collect();
    let gap = initial_gap(&problem);
    let delta = cfg.bound.as_ref().and_then(|b| b.delta).unwrap_or(DEFAULT_DELTA);
    let schedule = cfg.resolve_schedule(&problem)?;
    let noise = cfg.resolve_noise()?;
    let mut bound_kind = None;
    let mut checkpoints = Vec::new();
    if traces.len() >= 2 {
        for &t in &cfg.checkpoints_or_default() {
            let bound = bound_at(&schedule, &problem, Some(&noise), delta, gap, &traces, t)?;
            bound_kind = bound.map(|(k, _)| k).or(bound_kind);
            let report =
                ensemble_stats(&traces, t, bound.map_or(f64::INFINITY, |(_, v)| v))?;
            checkpoints.push(EnsembleCheckpoint { t, report });
        }
    }

    let summary = EnsembleSummary {
        kind: "ensemble",
        algorithm: algorithm.name(),
        horizon,
        seed_start: seeds.start,
        n_seeds: seed_list.len(),
        n_diverged: diverged_seeds.len(),
        diverged_seeds: diverged_seeds.clone(),
        bound_kind,
        delta,
        checkpoints,
    };
    write_json(&out.join("ensemble.json"), &summary)?;
    println!(
        "ensemble: {} seeds ({} diverged); wrote {} and {}",
        seed_list.len(),
        diverged_seeds.len(),
        out.join("seeds.csv").display(),
        out.join("ensemble.json").display()
    );
    if diverged_seeds.len() * 10 > seed_list.len() {
        Ok(EXIT_DIVERGED)
    } else {
        Ok(EXIT_OK)
    }
}

// ---------------------------------------------------------------------------
// compare

#[derive(Serialize)]
struct CompareSeed {
    seed: u64,
    csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_equivalence_dev: Option<f64>,
}

#[derive(Serialize)]
struct CompareSummary {
    kind: &'static str,
    algorithms: Vec<&'static str>,
    horizon: usize,
    seeds: Vec<CompareSeed>,
    /// Largest per-step relative deviation between the dual-averaging and
    /// regularized-SGD iterates, across all seeds; present when both
    /// algorithms were compared.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_equivalence_dev: Option<f64>,
}

fn compare_csv(
    algorithms: &[Algorithm],
    traces: &[Trace<f64>],
    equivalence_dev: Option<&[f64]>,
) -> String {
    let mut header = String::from("t");
    for a in algorithms {
        header.push_str(&format!(",grad_sq_{0},avg_sq_grad_{0}", a.name()));
    }
    if equivalence_dev.is_some() {
        header.push_str(",rel_dev");
    }
    let horizon = traces[0].len();
    let mut out = header;
    out.push('\n');
    let mut running: Vec<f64> = vec![0.0; traces.len()];
    for t in 1..=horizon {
        out.push_str(&t.to_string());
        for (i, trace) in traces.iter().enumerate() {
            running[i] += trace.grad_sq[t - 1];
            out.push_str(&format!(
                ",{:.16e},{:.16e}",
                trace.grad_sq[t - 1],
                running[i] / t as f64
            ));
        }
        if let Some(dev) = equivalence_dev {
            out.push_str(&format!(",{:.16e}", dev[t - 1]));
        }
        out.push('\n');
    }
    out
}

/// Runs several algorithms on one shared gradient stream per seed; writes an
/// aligned per-seed comparison CSV and a deviation summary.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<i32> {
    expect_kind(cfg, ExperimentKind::Compare)?;
    let out = ensure_out_dir(out_override, cfg)?;
    let problem = cfg.resolve_problem()?;
    let algorithms = cfg
        .algorithms
        .clone()
        .ok_or_else(|| Error::Config("compare needs `algorithms`".into()))?;
    let horizon = cfg
        .horizon
        .ok_or_else(|| Error::Config("compare needs `horizon`".into()))?;
    let seed_list: Vec<u64> = match (seed_override, cfg.seed, cfg.seeds) {
        (Some(s), _, _) => vec![s],
        (None, Some(s), _) => vec![s],
        (None, None, Some(range)) => range.iter().collect(),
        (None, None, None) => return Err(Error::Config("compare needs `seed` or `seeds`".into())),
    };

    let mut seeds_out = Vec::new();
    let mut overall_dev: Option<f64> = None;
    for seed in seed_list {
        let run_cfg = RunConfig {
            horizon,
            seed,
            algorithm: algorithms[0],
            noise: cfg.resolve_noise()?,
            schedule: cfg.resolve_schedule(&problem)?,
            record_full_iterates: cfg.record_full_iterates,
        };
        let paired = run_paired(&problem, &run_cfg, &algorithms)?;
        let csv_name = format!("compare_seed{seed}.csv");
        fs::write(
            out.join(&csv_name),
            compare_csv(&algorithms, &paired.traces, paired.equivalence_dev.as_deref()),
        )?;
        if let Some(dev) = paired.max_equivalence_dev {
            overall_dev = Some(overall_dev.map_or(dev, |m: f64| m.max(dev)));
        }
        seeds_out.push(CompareSeed {
            seed,
            csv: csv_name,
            max_equivalence_dev: paired.max_equivalence_dev,
        });
    }

    let summary = CompareSummary {
        kind: "compare",
        algorithms: algorithms.iter().map(|a| a.name()).collect(),
        horizon,
        seeds: seeds_out,
        max_equivalence_dev: overall_dev,
    };
    write_json(&out.join("compare.json"), &summary)?;
    match overall_dev {
        Some(dev) => println!(
            "compare: {} algorithms, max dual-averaging/regularized-SGD deviation {dev:.3e}; wrote {}",
            algorithms.len(),
            out.join("compare.json").display()
        ),
        None => println!(
            "compare: {} algorithms; wrote {}",
            algorithms.len(),
            out.join("compare.json").display()
        ),
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// verify-lemmas

#[derive(Serialize)]
struct NormTrialsSummary {
    trials: usize,
    failures: usize,
    seed: u64,
}

#[derive(Serialize)]
struct VerificationSummary {
    kind: &'static str,
    t_max: usize,
    eta_scale: f64,
    schedule_cells: Vec<ScheduleCertificate>,
    schedule_violations_total: usize,
    offsets: Vec<OffsetCertificate>,
    offset_violations_total: usize,
    norm_trials: NormTrialsSummary,
    pass: bool,
}

/// Sweeps the step-size inequalities over the configured `(L, ρ, σ)` grid,
/// checks the decayed-offset recipe, and fuzzes the norm decomposition
/// identity; writes `verification.json`. Exit code 3 when anything fails.
pub fn cmd_verify_lemmas(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
    corrupt: bool,
) -> Result<i32> {
    expect_kind(cfg, ExperimentKind::VerifyLemmas)?;
    let out = ensure_out_dir(out_override, cfg)?;
    let mut v = cfg.verify.clone().unwrap_or_default();
    if corrupt {
        // Fault injection: double every step size. The sweep must notice.
        v.eta_scale = 2.0;
    }

    let mut cells = Vec::new();
    for &l in &v.lipschitz_grid {
        for &rho in &v.rho_grid {
            for &sigma in &v.sigma_grid {
                cells.push((l, rho, sigma));
            }
        }
    }
    let schedule_cells: Vec<ScheduleCertificate> = cells
        .iter()
        .map(|&(l, rho, sigma)| verify_sgc_schedule(l, rho, sigma, v.t_max, v.eta_scale))
        .collect::<Result<_>>()?;

    let mut offset_cells = Vec::new();
    for &eta in &v.offset_eta_grid {
        for &alpha in &v.offset_alpha_grid {
            offset_cells.push((eta, alpha));
        }
    }
    let offsets: Vec<OffsetCertificate> = offset_cells
        .iter()
        .map(|&(eta, alpha)| {
            verify_decay_offsets(eta, alpha, decay_offset_gamma0(eta, alpha), v.t_max)
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(v.norm_seed);
    let mut norm_failures = 0usize;
    for _ in 0..v.norm_trials {
        let d = rng.random_range(1..=8usize);
        let sample_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..d).map(|_| StandardNormal.sample(rng)).collect()
        };
        let u = sample_vec(&mut rng);
        let w = sample_vec(&mut rng);
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        if !check_norm_decomposition(&u, &w, lambda)? {
            norm_failures += 1;
        }
    }

    let schedule_violations_total: usize =
        schedule_cells.iter().map(|c| c.violation_count).sum();
    let offset_violations_total: usize = offsets.iter().map(|c| c.violation_count).sum();
    let pass = schedule_violations_total == 0 && offset_violations_total == 0 && norm_failures == 0;

    let summary = VerificationSummary {
        kind: "verify_lemmas",
        t_max: v.t_max,
        eta_scale: v.eta_scale,
        schedule_cells,
        schedule_violations_total,
        offsets,
        offset_violations_total,
        norm_trials: NormTrialsSummary {
            trials: v.norm_trials,
            failures: norm_failures,
            seed: v.norm_seed,
        },
        pass,
    };
    write_json(&out.join("verification.json"), &summary)?;
    println!(
        "verify: {} schedule cells ({} violations), {} offset cells ({} violations), {} norm trials ({} failures); wrote {}",
        cells.len(),
        schedule_violations_total,
        offset_cells.len(),
        offset_violations_total,
        v.norm_trials,
        norm_failures,
        out.join("verification.json").display()
    );
    Ok(if pass { EXIT_OK } else { EXIT_VIOLATION })
}

// ---------------------------------------------------------------------------
// report

#[derive(Serialize)]
struct ProblemFacts {
    dim: usize,
    lipschitz: f64,
    f_star: f64,
    gap_from_origin: f64,
}

#[derive(Serialize)]
struct TraceReport {
    path: String,
    steps: usize,
    checkpoints: Vec<CheckpointSummary>,
    final_f: f64,
    final_b: f64,
}

#[derive(Serialize)]
struct PointCheck {
    point: String,
    mean_norm: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Serialize)]
struct NoiseReport {
    n_samples: usize,
    declared_rho: f64,
    declared_sigma: f64,
    unbiasedness: Vec<PointCheck>,
    growth_worst_ratio: f64,
    growth_pass: bool,
}

#[derive(Serialize)]
struct ReportSummary {
    kind: &'static str,
    problem: ProblemFacts,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<TraceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseReport>,
    pass: bool,
}

/// Summarizes an existing trace CSV against the applicable guarantee and/or
/// audits a noise model's declared assumptions on the configured problem;
/// writes `report.json`. Exit code 3 when a checked assumption fails.
pub fn cmd_report(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<i32> {
    expect_kind(cfg, ExperimentKind::Report)?;
    let out = ensure_out_dir(out_override, cfg)?;
    let problem = cfg.resolve_problem()?;
    let gap = initial_gap(&problem);
    let delta = cfg.bound.as_ref().and_then(|b| b.delta).unwrap_or(DEFAULT_DELTA);
    let mut pass = true;

    let trace_report = match &cfg.trace {
        None => None,
        Some(path) => {
            let trace = read_trace_csv(Path::new(path))?;
            let checkpoints_at = if cfg.checkpoints.is_some() || cfg.horizon.is_some() {
                cfg.checkpoints_or_default()
            } else {
                vec![trace.len()]
            };
            let schedule = cfg
                .schedule
                .as_ref()
                .map(|_| cfg.resolve_schedule(&problem))
                .transpose()?;
            let noise = cfg
                .noise
                .as_ref()
                .map(|_| cfg.resolve_noise())
                .transpose()?;
            let traces = std::slice::from_ref(&trace);
            let mut checkpoints = Vec::new();
            for &t in &checkpoints_at {
                let bound = match &schedule {
                    Some(s) => bound_at(s, &problem, noise.as_ref(), delta, gap, traces, t)?,
                    None => None,
                };
                checkpoints.push(CheckpointSummary {
                    t,
                    avg_sq_grad: avg_sq_grad(&trace, t)?,
                    bound: bound.map(|(_, v)| v),
                });
            }
            Some(TraceReport {
                path: path.clone(),
                steps: trace.len(),
                checkpoints,
                final_f: trace.f_val[trace.len() - 1],
                final_b: trace.b_running[trace.len() - 1],
            })
        }
    };

    let noise_report = match &cfg.noise {
        None => None,
        Some(_) => {
            let noise = cfg.resolve_noise()?;
            let n_samples = cfg.n_samples.unwrap_or(10_000);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
            let d = problem.dim();
            let mut points: Vec<(String, Vec<f64>)> = vec![("origin".into(), vec![0.0; d])];
            if let Some(x_star) = problem.minimizer() {
                points.push(("minimizer".into(), x_star.to_vec()));
            }
            for k in 1..=3 {
                let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                points.push((format!("random_{k}"), x));
            }

            let mut unbiasedness = Vec::new();
            for (label, x) in &points {
                let rep = check_unbiased(&problem, &noise, x, n_samples, &mut rng)?;
                pass &= rep.pass;
                unbiasedness.push(PointCheck {
                    point: label.clone(),
                    mean_norm: rep.mean_norm,
                    threshold: rep.threshold,
                    pass: rep.pass,
                });
            }
            let coords: Vec<Vec<f64>> = points.iter().map(|(_, x)| x.clone()).collect();
            let growth = check_growth_bound(&problem, &noise, &coords, n_samples, &mut rng)?;
            pass &= growth.pass;
            let (rho, sigma) = noise.declared_growth_params(&problem)?;
            Some(NoiseReport {
                n_samples,
                declared_rho: rho,
                declared_sigma: sigma,
                unbiasedness,
                growth_worst_ratio: growth.worst_ratio,
                growth_pass: growth.pass,
            })
        }
    };

    let summary = ReportSummary {
        kind: "report",
        problem: ProblemFacts {
            dim: problem.dim(),
            lipschitz: problem.smoothness(),
            f_star: problem.f_star(),
            gap_from_origin: gap,
        },
        trace: trace_report,
        noise: noise_report,
        pass,
    };
    write_json(&out.join("report.json"), &summary)?;
    println!(
        "report: checks {}; wrote {}",
        if pass { "pass" } else { "FAIL" },
        out.join("report.json").display()
    );
    Ok(if pass { EXIT_OK } else { EXIT_VIOLATION })
}
