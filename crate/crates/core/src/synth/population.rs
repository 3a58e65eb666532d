use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{solve_period, HouseholdParams, PeriodSolution};
use crate::error::{Error, Result};
use crate::household::{HouseholdPanel, LatentState};
use crate::pipeline::{write_records, PipelineConfig, RawRecord};
use crate::sampler::{household_seed, splitmix64};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

/// Distribution of households. Wages are in EUR per hour, expenditures in
/// EUR per month, time shares are fractions of the time budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub households: usize,
    pub periods: usize,
    pub seed: u64,
    pub alpha_mean: [f64; 3],
    pub alpha_sd: [f64; 3],
    /// Added to returns to scale when the mother's education dummy is one,
    /// split across inputs in proportion to `alpha_mean`.
    pub dummy_effect: f64,
    pub wage_mean: [f64; 2],
    pub wage_sd: [f64; 2],
    /// Correlation of the members' log wages.
    pub wage_corr: f64,
    /// Standard deviation of period-to-period log-wage deviations.
    pub wage_growth_sd: f64,
    /// Target share of the time budget spent on leisure.
    pub leisure_share: [f64; 2],
    pub private_exp: [f64; 2],
    pub public_exp: f64,
    /// Target revenue `P W` of child welfare at mean wages.
    pub welfare_revenue: f64,
    /// Elasticity of the welfare-revenue target with respect to household wages.
    pub welfare_wage_elasticity: f64,
    /// Log-normal dispersion of every preference target.
    pub preference_sd: f64,
    /// Member-1 Pareto weight.
    pub pareto_weight: f64,
    /// Standard deviation of per-period logit shifts of the Pareto weight.
    pub pareto_shift_sd: f64,
    /// Mean of full income in excess of planned spending.
    pub extra_income: f64,
    pub shock_sd: f64,
    /// Curvature of welfare utility; at 1 (log utility) input demand does not
    /// respond to productivity shocks.
    pub welfare_curvature: f64,
    /// Relative standard deviation of measurement error in childcare and child expenditure.
    pub me_sd: f64,
    /// Mean measurement error in child expenditure, relative to its true value.
    pub child_exp_bias: f64,
    /// Multiplier cap; utilities are rescaled so multipliers lie in `[1, lambda_cap]`.
    pub lambda_cap: f64,
    pub max_attempts: usize,
    pub units: PipelineConfig,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self::table1()
    }
}

impl PopulationSpec {
    /// Calibration to the survey sample: 132 couples, three periods.
    pub fn table1() -> Self {
        Self {
            households: 132,
            periods: 3,
            seed: 0,
            alpha_mean: [0.10, 0.14, 0.09],
            alpha_sd: [0.02, 0.02, 0.02],
            dummy_effect: 0.0,
            wage_mean: [13.68, 12.95],
            wage_sd: [6.65, 12.00],
            wage_corr: 0.3,
            wage_growth_sd: 0.05,
            leisure_share: [0.58, 0.64],
            private_exp: [362.00, 395.81],
            public_exp: 2164.85,
            welfare_revenue: 6800.0,
            welfare_wage_elasticity: 0.5,
            preference_sd: 0.2,
            pareto_weight: 0.5,
            pareto_shift_sd: 0.1,
            extra_income: 100.0,
            shock_sd: 0.1,
            welfare_curvature: 2.0,
            me_sd: 0.0,
            child_exp_bias: 0.0,
            lambda_cap: 1e4,
            max_attempts: 200,
            units: PipelineConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.periods == 0 {
            bad.push("periods must be positive");
        }
        if self.alpha_mean.iter().any(|a| !(*a > 0.0)) || !(self.alpha_mean.iter().sum::<f64>() < 1.0) {
            bad.push("alpha_mean must be positive with sum below 1");
        }
        let sds = [
            self.alpha_sd.to_vec(),
            self.wage_sd.to_vec(),
            vec![
                self.wage_growth_sd,
                self.preference_sd,
                self.pareto_shift_sd,
                self.shock_sd,
                self.me_sd,
                self.welfare_curvature,
            ],
        ]
        .concat();
        if sds.iter().any(|s| !(*s >= 0.0)) {
            bad.push("standard deviations must be non-negative");
        }
        if self.wage_mean.iter().any(|w| !(*w > 0.0)) {
            bad.push("wage means must be positive");
        }
        if self.leisure_share.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            bad.push("leisure shares must lie in (0, 1)");
        }
        if self.private_exp.iter().any(|q| !(*q > 0.0)) || !(self.public_exp > 0.0) || !(self.welfare_revenue > 0.0) {
            bad.push("expenditure targets must be positive");
        }
        if !(self.pareto_weight > 0.0 && self.pareto_weight < 1.0) {
            bad.push("pareto_weight must lie in (0, 1)");
        }
        if !(self.wage_corr.abs() < 1.0) {
            bad.push("wage_corr must lie in (-1, 1)");
        }
        if !(self.extra_income >= 0.0) || !(self.lambda_cap > 1.0) || self.max_attempts == 0 {
            bad.push("extra_income >= 0, lambda_cap > 1 and max_attempts > 0 required");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Spec(bad.join("; ")))
        }
    }
}

/// Latent truth of one household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub household_id: String,
    pub alpha: [f64; 3],
    pub rts: f64,
    pub shock: Vec<f64>,
    pub price: Vec<f64>,
    pub lindahl_public: [Vec<f64>; 2],
    pub lindahl_welfare: [Vec<f64>; 2],
    pub welfare: Vec<f64>,
    pub true_childcare: [Vec<f64>; 2],
    pub true_leisure: [Vec<f64>; 2],
    pub true_child_exp: Vec<f64>,
    pub utility: [Vec<f64>; 2],
    pub lambda: [Vec<f64>; 2],
    pub params: HouseholdParams,
}

impl GroundTruth {
    pub fn state(&self) -> LatentState {
        let t = self.shock.len();
        LatentState {
            utility: self.utility.clone(),
            lambda: self.lambda.clone(),
            lindahl_public: self.lindahl_public.clone(),
            lindahl_welfare: self.lindahl_welfare.clone(),
            welfare: self.welfare.clone(),
            true_leisure: self.true_leisure.clone(),
            true_childcare: self.true_childcare.clone(),
            true_child_exp: self.true_child_exp.clone(),
            elasticity: self.alpha.map(|a| vec![a; t]),
            shock: self.shock.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub spec: PopulationSpec,
    pub panels: Vec<HouseholdPanel>,
    pub truths: Vec<GroundTruth>,
    pub records: Vec<RawRecord>,
    /// Parameter draws rejected for corner solutions.
    pub corners: usize,
    pub attempts: usize,
}

/// Work share the welfare-revenue target leaves room for at the lowest wage.
const MIN_WORK: f64 = 0.05;

fn lognormal_params(mean: f64, sd: f64) -> (f64, f64) {
    let s2 = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - 0.5 * s2, s2.sqrt())
}

fn ln_noise<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    (sd * rng.sample::<f64, _>(StandardNormal) - 0.5 * sd * sd).exp()
}

struct Household {
    panel: HouseholdPanel,
    truth: GroundTruth,
    records: Vec<RawRecord>,
}

fn draw_alpha<R: Rng>(spec: &PopulationSpec, rng: &mut R, dummy: bool) -> Option<[f64; 3]> {
    let total: f64 = spec.alpha_mean.iter().sum();
    let mut alpha = [0.0; 3];
    for k in 0..3 {
        let n = Normal::new(spec.alpha_mean[k], spec.alpha_sd[k]).ok()?;
        alpha[k] = n.sample(rng);
        if dummy {
            alpha[k] += spec.dummy_effect * spec.alpha_mean[k] / total;
        }
    }
    (alpha.iter().all(|a| *a >= 0.01) && alpha.iter().sum::<f64>() <= 0.99).then_some(alpha)
}

/// Draws one household; `None` on a corner or an out-of-range draw.
fn draw_household<R: Rng>(spec: &PopulationSpec, rng: &mut R, id: &str, strata: [f64; 2]) -> Option<Household> {
    let n = spec.periods;
    let u = &spec.units;
    let money = u.money_unit;
    let educ = [rng.random_bool(0.4), rng.random_bool(0.4)];
    let alpha = draw_alpha(spec, rng, educ[1])?;

    let [z0, z1] = strata;
    let base = [z0, z1]
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let (m, s) = lognormal_params(spec.wage_mean[i], spec.wage_sd[i]);
            (m + s * z).exp()
        })
        .collect::<Vec<f64>>();
    let hourly: [Vec<f64>; 2] = [0, 1].map(|i| (0..n).map(|_| base[i] * ln_noise(rng, spec.wage_growth_sd)).collect());
    let wage: [Vec<f64>; 2] = [0, 1].map(|i| hourly[i].iter().map(|w| u.wage_to_model(*w)).collect());
    let mean_wage = [0, 1].map(|i| wage[i].iter().sum::<f64>() / n as f64);

    let pop_wage = u.wage_to_model(spec.wage_mean[0]) + u.wage_to_model(spec.wage_mean[1]);
    let revenue = spec.welfare_revenue / money
        * ((mean_wage[0] + mean_wage[1]) / pop_wage).powf(spec.welfare_wage_elasticity)
        * ln_noise(rng, spec.preference_sd);
    let leisure_value = [0, 1].map(|i| mean_wage[i] * spec.leisure_share[i] * ln_noise(rng, spec.preference_sd));
    let revenue = (0..2)
        .map(|i| {
            let w_min = wage[i].iter().copied().fold(f64::INFINITY, f64::min);
            (0.9 * (1.0 - MIN_WORK) * w_min - leisure_value[i]) / alpha[i]
        })
        .fold(revenue, f64::min);
    if !(revenue > 0.0) {
        return None;
    }
    let public = spec.public_exp / money * ln_noise(rng, spec.preference_sd);
    let split_q: f64 = rng.random_range(0.3..0.7);
    let split_w: f64 = rng.random_range(0.3..0.7);
    let mu0 = spec.pareto_weight;
    let mu = [mu0, 1.0 - mu0];
    let values = [0, 1].map(|i| {
        [
            leisure_value[i],
            spec.private_exp[i] / money * ln_noise(rng, spec.preference_sd),
            public * if i == 0 { split_q } else { 1.0 - split_q },
            revenue * if i == 0 { split_w } else { 1.0 - split_w },
        ]
    });
    // welfare at the revenue target, no shock and mean wages
    let log_w0 = {
        let r: f64 = alpha.iter().sum();
        let prices = [mean_wage[0], mean_wage[1], 1.0];
        let x = (1.0 - r) * revenue.ln() - (0..3).map(|k| alpha[k] * (alpha[k] / prices[k]).ln()).sum::<f64>();
        revenue.ln() - x
    };
    let welfare_scale = ((spec.welfare_curvature - 1.0) * log_w0).exp();
    let weights = [0, 1].map(|i| {
        let mut a = values[i].map(|v| v / mu[i]);
        a[3] *= welfare_scale;
        a
    });
    let logit = (mu0 / (1.0 - mu0)).ln();
    let pareto: Vec<f64> = (0..n)
        .map(|_| {
            let x = logit + spec.pareto_shift_sd * rng.sample::<f64, _>(StandardNormal);
            1.0 / (1.0 + (-x).exp())
        })
        .collect();
    let rts: f64 = alpha.iter().sum();
    let nonlabor_income: Vec<f64> = (0..n)
        .map(|t| {
            let m = [pareto[t], 1.0 - pareto[t]];
            let planned: f64 = (0..2)
                .map(|i| m[i] * (weights[i][0] + weights[i][1] + weights[i][2] + rts * weights[i][3] / welfare_scale))
                .sum();
            let extra = spec.extra_income / money * ln_noise(rng, 0.3);
            planned + extra - wage[0][t] - wage[1][t]
        })
        .collect();
    let shock: Vec<f64> = (0..n).map(|_| spec.shock_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let params = HouseholdParams {
        weights,
        alpha,
        pareto,
        wage: wage.clone(),
        nonlabor_income,
        shock: shock.clone(),
        curvature: spec.welfare_curvature,
    };
    let sol: Vec<PeriodSolution> = (0..n).map(|t| solve_period(&params, t)).collect::<Result<_>>().ok()?;

    let mut lambda: [Vec<f64>; 2] = [0, 1].map(|i| sol.iter().map(|s| s.lambda[i]).collect());
    let mut utility: [Vec<f64>; 2] = [0, 1].map(|i| sol.iter().map(|s| s.utility[i]).collect());
    for i in 0..2 {
        let lo = lambda[i].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lambda[i].iter().copied().fold(0.0, f64::max);
        if hi / lo > spec.lambda_cap {
            return None;
        }
        lambda[i].iter_mut().for_each(|l| *l /= lo);
        utility[i].iter_mut().for_each(|v| *v /= lo);
    }

    let per = |f: &dyn Fn(&PeriodSolution) -> f64| -> Vec<f64> { sol.iter().map(f).collect() };
    let mem = |f: &dyn Fn(&PeriodSolution, usize) -> f64| -> [Vec<f64>; 2] {
        [0, 1].map(|i| sol.iter().map(|s| f(s, i)).collect())
    };
    let true_childcare = mem(&|s, i| s.childcare[i]);
    let true_child_exp = per(&|s| s.child_exp);
    let work = mem(&|s, i| s.work[i]);

    let trunc_normal = |rng: &mut R, lo: f64, hi: f64| -> Option<f64> {
        for _ in 0..1000 {
            let z: f64 = rng.sample(StandardNormal);
            if z > lo && z < hi {
                return Some(z);
            }
        }
        None
    };
    let mut childcare: [Vec<f64>; 2] = true_childcare.clone();
    let mut child_exp = true_child_exp.clone();
    if spec.me_sd > 0.0 || spec.child_exp_bias != 0.0 {
        for t in 0..n {
            for i in 0..2 {
                if spec.me_sd > 0.0 {
                    let h = true_childcare[i][t];
                    let cap = (1.0 - work[i][t]) / h - 1.0;
                    let z = trunc_normal(rng, -1.0 / spec.me_sd, cap / spec.me_sd)?;
                    childcare[i][t] = h * (1.0 + spec.me_sd * z);
                }
            }
            let c = true_child_exp[t];
            let shift = 1.0 + spec.child_exp_bias;
            let z = if spec.me_sd > 0.0 {
                trunc_normal(rng, -shift / spec.me_sd, f64::INFINITY)?
            } else {
                0.0
            };
            child_exp[t] = c * (shift + spec.me_sd * z);
        }
    }
    let leisure: [Vec<f64>; 2] = [0, 1].map(|i| (0..n).map(|t| 1.0 - work[i][t] - childcare[i][t]).collect());

    let n_children: f64 = match rng.random_range(0.0..1.0) {
        x if x < 0.3 => 1.0,
        x if x < 0.75 => 2.0,
        x if x < 0.95 => 3.0,
        _ => 4.0,
    };
    let age = [(46.25, 7.99), (44.08, 7.28)].map(|(m, s)| (m + s * rng.sample::<f64, _>(StandardNormal)).round().max(20.0));
    let child_age = (13.15 + 6.36 * rng.sample::<f64, _>(StandardNormal)).clamp(0.5, 25.0);
    let dwelling = if rng.random_bool(0.7) { 1.0 } else { 0.0 };
    let educ_f = educ.map(|e| if e { 1.0 } else { 0.0 });

    let private = mem(&|s, i| s.private_exp[i]);
    let public_exp = per(&|s| s.public_exp);
    let records: Vec<RawRecord> = (0..n)
        .map(|t| {
            let q = [private[0][t] * money, private[1][t] * money];
            let (qp, c) = (public_exp[t] * money, child_exp[t] * money);
            let earned = params.nonlabor_income[t] + wage[0][t] * work[0][t] + wage[1][t] * work[1][t];
            RawRecord {
                household_id: id.to_string(),
                year: 2008 + t as i32,
                n_adults: Some(2.0),
                n_children: Some(n_children),
                wage: [Some(hourly[0][t]), Some(hourly[1][t])],
                work: [0, 1].map(|i| Some(u.time_from_model(work[i][t]))),
                childcare: [0, 1].map(|i| Some(u.time_from_model(childcare[i][t]))),
                private_exp: q.map(Some),
                public_exp: Some(qp),
                child_exp: Some(c),
                income: Some((earned * money).max(q[0] + q[1] + qp + c)),
                age: age.map(Some),
                child_age_mean: Some(child_age),
                educ: educ_f.map(Some),
                dwelling: Some(dwelling),
            }
        })
        .collect();
    let covariates = u
        .covariates
        .iter()
        .map(|c| records[0].demographic(c).flatten().unwrap_or(0.0))
        .collect();
    let panel = HouseholdPanel {
        id: id.to_string(),
        wage,
        leisure,
        childcare,
        work,
        private_exp: private,
        public_exp,
        child_exp,
        covariates,
    };
    let truth = GroundTruth {
        household_id: id.to_string(),
        alpha,
        rts,
        shock,
        price: per(&|s| s.price),
        lindahl_public: mem(&|s, i| s.lindahl_public[i]),
        lindahl_welfare: mem(&|s, i| s.lindahl_welfare[i]),
        welfare: per(&|s| s.welfare),
        true_childcare,
        true_leisure: mem(&|s, i| s.leisure[i]),
        true_child_exp,
        utility,
        lambda,
        params,
    };
    panel.validate().ok()?;
    Some(Household { panel, truth, records })
}

/// Standard-normal wage scores on stratified quantiles, randomly paired
/// across households, so that sample wage moments track the targets.
fn wage_strata(spec: &PopulationSpec) -> Vec<[f64; 2]> {
    let n = spec.households;
    let std = StatNormal::new(0.0, 1.0).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x5741_4745));
    let mut scores = [0, 1].map(|_| {
        let mut z: Vec<f64> = (0..n).map(|j| std.inverse_cdf((j as f64 + 0.5) / n as f64)).collect();
        z.shuffle(&mut rng);
        z
    });
    let rho = spec.wage_corr;
    let scale = (1.0 - rho * rho).sqrt();
    let first = std::mem::take(&mut scores[0]);
    first
        .into_iter()
        .zip(&scores[1])
        .map(|(a, b)| [a, rho * a + scale * b])
        .collect()
}

/// Generates `spec.households` independent households, each from its own
/// RNG stream. Corner draws are redrawn; more than half of all draws being
/// corners is an error.
pub fn generate_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let strata = wage_strata(spec);
    let out: Vec<(Option<Household>, usize)> = (0..spec.households)
        .into_par_iter()
        .map(|j| {
            let id = format!("hh{j:05}");
            let mut rng = ChaCha8Rng::seed_from_u64(household_seed(spec.seed, &id));
            for attempt in 1..=spec.max_attempts {
                if let Some(h) = draw_household(spec, &mut rng, &id, strata[j]) {
                    return (Some(h), attempt);
                }
            }
            (None, spec.max_attempts)
        })
        .collect();
    let attempts: usize = out.iter().map(|o| o.1).sum();
    let corners = attempts - out.iter().filter(|o| o.0.is_some()).count();
    if out.iter().any(|o| o.0.is_none()) || 2 * corners > attempts {
        return Err(Error::TooManyCorners { rejected: corners, attempts });
    }
    let mut pop = Population {
        spec: spec.clone(),
        panels: Vec::with_capacity(out.len()),
        truths: Vec::with_capacity(out.len()),
        records: Vec::new(),
        corners,
        attempts,
    };
    for (h, _) in out {
        let h = h.expect("checked above");
        pop.panels.push(h.panel);
        pop.truths.push(h.truth);
        pop.records.extend(h.records);
    }
    Ok(pop)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a PopulationSpec,
    corners: usize,
    attempts: usize,
    truths: &'a [GroundTruth],
}

/// Writes the survey-unit CSV and the ground-truth JSON sidecar.
pub fn write_population<W1: Write, W2: Write>(pop: &Population, csv: W1, json: W2) -> Result<()> {
    write_records(csv, &pop.records)?;
    serde_json::to_writer_pretty(
        json,
        &Sidecar {
            spec: &pop.spec,
            corners: pop.corners,
            attempts: pop.attempts,
            truths: &pop.truths,
        },
    )?;
    Ok(())
}
