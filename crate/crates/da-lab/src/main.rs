//! `da-lab`: run, compare, and verify dual-averaging experiments described
//! by TOML config files. See the library docs for the config format.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use da_lab::cli::{
    cmd_compare, cmd_ensemble, cmd_report, cmd_run, cmd_verify_lemmas, exit_code_for,
};
use da_lab::config::parse_config;

#[derive(Parser)]
#[command(
    name = "da-lab",
    version,
    about = "Dual averaging under noisy gradients: runs, ensembles, comparisons, and inequality sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded trajectory; writes trace.csv and summary.json.
    Run {
        /// Experiment config (TOML, kind = "run").
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults: config out_dir, then $DA_LAB_OUT, then .).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seed range in parallel; writes seeds.csv and ensemble.json.
    Ensemble {
        /// Experiment config (TOML, kind = "ensemble").
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several algorithms on one gradient stream; writes per-seed
    /// comparison CSVs and compare.json.
    Compare {
        /// Experiment config (TOML, kind = "compare").
        config: PathBuf,
        /// Compare on this single seed instead of the config's seed(s).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the step-size inequalities and offset recipe; writes
    /// verification.json. Exits 3 if any inequality fails.
    VerifyLemmas {
        /// Experiment config (TOML, kind = "verify_lemmas").
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fault injection: double every step size; the sweep must then
        /// report violations (a self-test of the verifier).
        #[arg(long)]
        corrupt: bool,
    },
    /// Summarize an existing trace and/or audit a noise model's declared
    /// assumptions; writes report.json.
    Report {
        /// Experiment config (TOML, kind = "report").
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> da_lab::Result<i32> {
    let config_path = match &command {
        Command::Run { config, .. }
        | Command::Ensemble { config, .. }
        | Command::Compare { config, .. }
        | Command::VerifyLemmas { config, .. }
        | Command::Report { config, .. } => config.clone(),
    };
    let text = std::fs::read_to_string(&config_path).map_err(|e| {
        da_lab::Error::Config(format!("reading {}: {e}", config_path.display()))
    })?;
    let cfg = parse_config(&text)?;
    match command {
        Command::Run { seed, out, .. } => cmd_run(&cfg, seed, out.as_deref()),
        Command::Ensemble { out, .. } => cmd_ensemble(&cfg, out.as_deref()),
        Command::Compare { seed, out, .. } => cmd_compare(&cfg, seed, out.as_deref()),
        Command::VerifyLemmas { out, corrupt, .. } => {
            cmd_verify_lemmas(&cfg, out.as_deref(), corrupt)
        }
        Command::Report { out, .. } => cmd_report(&cfg, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
