//! Batch front end: `check`, `estimate`, `ci`, `synth` and `summarize`.
//!
//! Exit codes: 0 success or model not rejected, 1 model rejected or a
//! household infeasible, 2 usage or configuration error, 3 I/O or numeric
//! failure. Every flag can also be set through an environment variable
//! with prefix `COLLECTIVE_`.

mod commands;
mod config;

pub use commands::{
    check_panels, ci_panels, cmd_check, cmd_ci, cmd_estimate, cmd_summarize, cmd_synth, estimate_panels, load_sample,
    sample_households, truth_path, CheckReport, CiReport, Draws, EstimateReport, Excluded, HouseholdCheck, Outcome,
    SummarizeReport, SynthReport,
};
pub use config::{parse_target, RunConfig};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::elvis::Target;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "collective", version, about = "Revealed-preference tests and technology inference for collective households")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Input CSV with one row per household-year.
    #[arg(long, global = true, env = "COLLECTIVE_DATA")]
    pub data: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long, global = true, env = "COLLECTIVE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "COLLECTIVE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "COLLECTIVE_JOBS")]
    pub jobs: Option<usize>,
    /// Confidence level of the test and the confidence set.
    #[arg(long, global = true, env = "COLLECTIVE_LEVEL")]
    pub level: Option<f64>,
    /// `rts`, `alpha1`..`alpha3` or `betaK` (K-th regression coefficient, 0 = intercept).
    #[arg(long, global = true, env = "COLLECTIVE_TARGET", value_parser = parse_target)]
    pub target: Option<Target>,
    /// Output path: the JSON report, or the CSV for `synth`.
    #[arg(long, global = true, env = "COLLECTIVE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Per-household profit-maximisation bounds and feasibility.
    Check,
    /// Run the sampler and test the model.
    Estimate,
    /// Confidence set for the target parameter.
    Ci,
    /// Generate a synthetic population with ground truth.
    Synth,
    /// Sample-construction report and summary statistics.
    Summarize,
}

impl Cli {
    /// Configuration file overlaid with flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.data.is_some() {
            cfg.data = self.data.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.seed = self.seed.or(cfg.seed);
        cfg.jobs = self.jobs.or(cfg.jobs);
        cfg.level = self.level.unwrap_or(cfg.level);
        cfg.target = self.target.unwrap_or(cfg.target);
        cfg.finalize()
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Spec(_) | Error::InvalidRts(_) | Error::InvalidRatioBound(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Runs one subcommand under the configured thread budget.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match command {
        Command::Check => cmd_check(cfg),
        Command::Estimate => cmd_estimate(cfg),
        Command::Ci => cmd_ci(cfg),
        Command::Synth => cmd_synth(cfg),
        Command::Summarize => cmd_summarize(cfg),
    })
}

fn emit(command: Command, cfg: &RunConfig, out: &Outcome) -> Result<()> {
    match (&cfg.out, command) {
        (Some(p), c) if c != Command::Synth => std::fs::write(p, &out.json)?,
        _ => print!("{}", out.json),
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = cli
        .run_config()
        .and_then(|cfg| execute(cli.command, &cfg).and_then(|o| emit(cli.command, &cfg, &o).map(|_| o.code)));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
