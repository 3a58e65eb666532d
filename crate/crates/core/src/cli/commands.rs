use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::elvis::{confidence_interval, ConfidenceSet, HouseholdSample, MomentPanel};
use crate::error::{Error, Result};
use crate::household::{gapm_rts_upper_bound, HouseholdPanel, RtsInterval, DEFAULT_GRID_STEP};
use crate::pipeline::{construct_sample, load_panel, summarize, PipelineReport, Summary};
use crate::sampler::{initialize, run_chains};
use crate::synth::{generate_population, write_population};

/// JSON document plus the process exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: String,
    pub code: i32,
}

impl Outcome {
    fn new<T: Serialize>(value: &T, ok: bool) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_string_pretty(value)? + "\n",
            code: if ok { 0 } else { 1 },
        })
    }
}

fn require_data(cfg: &RunConfig) -> Result<&Path> {
    cfg.data
        .as_deref()
        .ok_or_else(|| Error::Config("no data file given (use --data)".into()))
}

/// Loads the CSV named in the configuration and applies the sample rules.
pub fn load_sample(cfg: &RunConfig) -> Result<(Vec<HouseholdPanel>, PipelineReport)> {
    let records = load_panel(require_data(cfg)?)?;
    Ok(construct_sample(&records, &cfg.pipeline))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HouseholdCheck {
    pub household_id: String,
    /// Returns-to-scale interval consistent with profit maximisation; `None` when empty.
    pub rts_bound: Option<RtsInterval>,
    pub feasible: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub pipeline: PipelineReport,
    pub feasible: usize,
    pub infeasible: usize,
    pub households: Vec<HouseholdCheck>,
}

pub fn check_panels(panels: &[HouseholdPanel], cfg: &RunConfig) -> Vec<HouseholdCheck> {
    use rayon::prelude::*;
    panels
        .par_iter()
        .map(|p| {
            let bound = gapm_rts_upper_bound(p, DEFAULT_GRID_STEP);
            let init = initialize(p, None, &cfg.sampler);
            HouseholdCheck {
                household_id: p.id.clone(),
                rts_bound: bound,
                feasible: init.is_ok(),
                message: init.err().map(|e| e.to_string()),
            }
        })
        .collect()
}

/// Per-household rationalizability; exit code 1 if any household is infeasible.
pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome> {
    let (panels, pipeline) = load_sample(cfg)?;
    let households = check_panels(&panels, cfg);
    let feasible = households.iter().filter(|h| h.feasible).count();
    let report = CheckReport {
        pipeline,
        feasible,
        infeasible: households.len() - feasible,
        households,
    };
    Outcome::new(&report, report.infeasible == 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excluded {
    pub household_id: String,
    pub reason: String,
}

/// Chains run for every household that admits a feasible start.
pub struct Draws {
    pub samples: Vec<HouseholdSample>,
    pub excluded: Vec<Excluded>,
    pub draws_per_household: usize,
    pub mean_acceptance_rate: f64,
}

pub fn sample_households(panels: &[HouseholdPanel], cfg: &RunConfig) -> Result<Draws> {
    let s = &cfg.sampler;
    let draws_per_household = s.post_burn_draws / s.keep_every();
    if draws_per_household == 0 {
        return Err(Error::Config("sampler keeps no draws; raise post_burn_draws".into()));
    }
    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    let mut rate = 0.0;
    for (p, r) in panels.iter().zip(run_chains(panels, s)) {
        match r {
            Ok(d) => {
                rate += d.acceptance_rate;
                samples.push(HouseholdSample::new(p, &d)?);
            }
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                eprintln!("warning: excluding household {}: {e}", p.id);
                excluded.push(Excluded {
                    household_id: p.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::Config("no household admits a feasible latent state".into()));
    }
    Ok(Draws {
        mean_acceptance_rate: rate / samples.len() as f64,
        samples,
        excluded,
        draws_per_household,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub households: usize,
    pub excluded: Vec<Excluded>,
    pub draws_per_household: usize,
    pub mean_acceptance_rate: f64,
    pub gamma: Vec<f64>,
    pub objective: f64,
    pub ts: f64,
    pub df: usize,
    pub level: f64,
    pub critical_value: f64,
    pub verdict: String,
}

pub fn estimate_panels(panels: &[HouseholdPanel], cfg: &RunConfig) -> Result<EstimateReport> {
    let d = sample_households(panels, cfg)?;
    let mp = MomentPanel::from_matrices(d.samples.iter().map(|s| s.mv.clone()).collect())?;
    let t = mp.test_statistic(cfg.level, &cfg.ci.optimizer)?;
    Ok(EstimateReport {
        households: d.samples.len(),
        excluded: d.excluded,
        draws_per_household: d.draws_per_household,
        mean_acceptance_rate: d.mean_acceptance_rate,
        gamma: t.solution.gamma,
        objective: t.solution.objective_value,
        ts: t.ts,
        df: t.df,
        level: t.level,
        critical_value: t.critical_value,
        verdict: if t.passes { "not rejected" } else { "rejected" }.into(),
    })
}

/// Model test; exit code 1 when rejected.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<Outcome> {
    let (panels, _) = load_sample(cfg)?;
    let report = estimate_panels(&panels, cfg)?;
    Outcome::new(&report, report.verdict == "not rejected")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiReport {
    pub households: usize,
    pub excluded: Vec<Excluded>,
    /// `[lo, hi]`; `null` endpoints when the set is empty.
    pub interval: [f64; 2],
    pub confidence_set: ConfidenceSet,
}

pub fn ci_panels(panels: &[HouseholdPanel], cfg: &RunConfig) -> Result<CiReport> {
    let d = sample_households(panels, cfg)?;
    let set = confidence_interval(&d.samples, cfg.target, cfg.level, &cfg.ci)?;
    Ok(CiReport {
        households: d.samples.len(),
        excluded: d.excluded,
        interval: [set.lo, set.hi],
        confidence_set: set,
    })
}

/// Confidence set for the configured target; exit code 1 when empty.
pub fn cmd_ci(cfg: &RunConfig) -> Result<Outcome> {
    let (panels, _) = load_sample(cfg)?;
    let report = ci_panels(&panels, cfg)?;
    if report.confidence_set.empty {
        eprintln!("warning: empty confidence set; the model is rejected at every scanned value");
    }
    Outcome::new(&report, !report.confidence_set.empty)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthReport {
    pub csv: PathBuf,
    pub truth: PathBuf,
    pub households: usize,
    pub corners: usize,
    pub attempts: usize,
    pub summary: Option<Summary>,
}

/// Sidecar path: the CSV path with extension `truth.json`.
pub fn truth_path(csv: &Path) -> PathBuf {
    csv.with_extension("truth.json")
}

/// Writes a synthetic population to `--out` plus its ground-truth sidecar.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Outcome> {
    let csv = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("synth needs an output path (use --out)".into()))?;
    let pop = generate_population(&cfg.synth)?;
    if pop.panels.is_empty() {
        eprintln!("warning: population has no households");
    }
    let truth = truth_path(&csv);
    write_population(
        &pop,
        BufWriter::new(File::create(&csv)?),
        BufWriter::new(File::create(&truth)?),
    )?;
    let report = SynthReport {
        csv,
        truth,
        households: pop.panels.len(),
        corners: pop.corners,
        attempts: pop.attempts,
        summary: summarize(&pop.panels, &cfg.synth.units),
    };
    Outcome::new(&report, true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummarizeReport {
    pub pipeline: PipelineReport,
    pub summary: Option<Summary>,
}

/// Sample-construction report and summary statistics.
pub fn cmd_summarize(cfg: &RunConfig) -> Result<Outcome> {
    let (panels, pipeline) = load_sample(cfg)?;
    let summary = summarize(&panels, &cfg.pipeline);
    Outcome::new(&SummarizeReport { pipeline, summary }, true)
}
