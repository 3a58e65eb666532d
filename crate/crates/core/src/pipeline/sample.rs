use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::record::RawRecord;
use crate::household::HouseholdPanel;

/// Unit conventions and selection options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Periods kept per household.
    pub periods: usize,
    /// Weekly hours available to a member after 56 hours of personal care.
    pub weekly_hours: f64,
    pub weeks_per_month: f64,
    /// Euros per model money unit.
    pub money_unit: f64,
    /// Demographic columns copied into [`HouseholdPanel::covariates`].
    pub covariates: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            periods: 3,
            weekly_hours: 112.0,
            weeks_per_month: 4.3,
            money_unit: 1000.0,
            covariates: ["n_children", "child_age_mean", "educ_1", "educ_2"].map(String::from).to_vec(),
        }
    }
}

impl PipelineConfig {
    /// Hours in the normalised monthly time budget.
    pub fn monthly_hours(&self) -> f64 {
        self.weekly_hours * self.weeks_per_month
    }

    /// Hourly wage in EUR to model money per unit of normalised time.
    pub fn wage_to_model(&self, hourly: f64) -> f64 {
        hourly * self.monthly_hours() / self.money_unit
    }

    pub fn wage_from_model(&self, w: f64) -> f64 {
        w * self.money_unit / self.monthly_hours()
    }

    /// Weekly hours to a fraction of the time budget.
    pub fn time_to_model(&self, weekly: f64) -> f64 {
        weekly * self.weeks_per_month / self.monthly_hours()
    }

    pub fn time_from_model(&self, x: f64) -> f64 {
        x * self.monthly_hours() / self.weeks_per_month
    }
}

/// Selection rules in the order they are applied.
pub const RULES: [&str; 7] = [
    "single_or_childless",
    "wage_missing_or_zero",
    "work_missing",
    "expenditure_missing_zero_or_above_income",
    "negative_leisure",
    "too_few_periods",
    "missing_demographics",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub input_records: usize,
    /// Records dropped by each rule, keyed by rule name.
    pub dropped: BTreeMap<String, usize>,
    pub imputed_childcare: usize,
    pub imputed_child_exp: usize,
    pub kept_records: usize,
    pub households: usize,
    pub periods: usize,
}

fn positive(v: Option<f64>) -> bool {
    v.is_some_and(|x| x > 0.0)
}

/// Applies the sample-construction rules and converts to model units.
///
/// Drops, in order: single or childless households, zero or missing wages,
/// missing hours of work, and missing, zero or above-income expenditures.
/// Missing or zero childcare and child expenditure are then imputed with
/// year means of the remaining sample. Households with a non-positive
/// residual leisure in any year are dropped; weekly time is scaled to
/// months and divided by the monthly time budget; each household keeps its
/// first `cfg.periods` years (fewer means dropped); households with missing
/// demographics in their first kept year are dropped.
pub fn construct_sample(records: &[RawRecord], cfg: &PipelineConfig) -> (Vec<HouseholdPanel>, PipelineReport) {
    let mut report = PipelineReport {
        input_records: records.len(),
        periods: cfg.periods,
        ..Default::default()
    };
    for r in RULES {
        report.dropped.insert(r.to_string(), 0);
    }
    let mut drop = |rule: &str, n: usize| *report.dropped.get_mut(rule).expect("known rule") += n;

    let mut keep: Vec<RawRecord> = Vec::with_capacity(records.len());
    for r in records {
        let rule = if !(r.n_adults.is_some_and(|n| n >= 2.0) && r.n_children.is_some_and(|n| n >= 1.0)) {
            Some(RULES[0])
        } else if !(positive(r.wage[0]) && positive(r.wage[1])) {
            Some(RULES[1])
        } else if r.work.iter().any(|w| !w.is_some_and(|x| x >= 0.0)) {
            Some(RULES[2])
        } else if !(positive(r.private_exp[0]) && positive(r.private_exp[1]) && positive(r.public_exp)) {
            Some(RULES[3])
        } else {
            let total = r.private_exp[0].unwrap_or(0.0)
                + r.private_exp[1].unwrap_or(0.0)
                + r.public_exp.unwrap_or(0.0)
                + r.child_exp.unwrap_or(0.0);
            match r.income {
                Some(inc) if total > inc * (1.0 + 1e-9) => Some(RULES[3]),
                _ => None,
            }
        };
        match rule {
            Some(rule) => drop(rule, 1),
            None => keep.push(r.clone()),
        }
    }

    let mut sums: BTreeMap<i32, [(f64, usize); 3]> = BTreeMap::new();
    for r in &keep {
        let e = sums.entry(r.year).or_default();
        for (k, v) in [r.childcare[0], r.childcare[1], r.child_exp].into_iter().enumerate() {
            if let Some(x) = v.filter(|x| *x > 0.0) {
                e[k].0 += x;
                e[k].1 += 1;
            }
        }
    }
    let year_mean = |year: i32, k: usize| {
        let (s, n) = sums[&year][k];
        if n > 0 { s / n as f64 } else { 0.0 }
    };
    for r in keep.iter_mut() {
        for i in 0..2 {
            if !positive(r.childcare[i]) {
                r.childcare[i] = Some(year_mean(r.year, i));
                report.imputed_childcare += 1;
            }
        }
        if !positive(r.child_exp) {
            r.child_exp = Some(year_mean(r.year, 2));
            report.imputed_child_exp += 1;
        }
    }

    let mut by_household: BTreeMap<String, Vec<RawRecord>> = BTreeMap::new();
    for r in keep {
        by_household.entry(r.household_id.clone()).or_default().push(r);
    }
    let leisure = |r: &RawRecord, i: usize| cfg.weekly_hours - r.work[i].unwrap_or(0.0) - r.childcare[i].unwrap_or(0.0);
    let bad: BTreeSet<String> = by_household
        .iter()
        .filter(|(_, rs)| {
            rs.iter().any(|r| {
                (0..2).any(|i| !(leisure(r, i) > 0.0) || !positive(r.childcare[i])) || !positive(r.child_exp)
            })
        })
        .map(|(id, _)| id.clone())
        .collect();
    for id in &bad {
        drop(RULES[4], by_household.remove(id).map_or(0, |v| v.len()));
    }

    let mut panels = Vec::new();
    for (id, mut rs) in by_household {
        rs.sort_by_key(|r| r.year);
        if rs.len() < cfg.periods || cfg.periods == 0 {
            drop(RULES[5], rs.len());
            continue;
        }
        drop(RULES[5], rs.len() - cfg.periods);
        rs.truncate(cfg.periods);
        let covariates: Option<Vec<f64>> = cfg
            .covariates
            .iter()
            .map(|c| rs[0].demographic(c).flatten())
            .collect();
        let Some(covariates) = covariates else {
            drop(RULES[6], rs.len());
            continue;
        };
        let col = |f: &dyn Fn(&RawRecord) -> f64| -> Vec<f64> { rs.iter().map(f).collect() };
        let member = |f: &dyn Fn(&RawRecord, usize) -> f64| -> [Vec<f64>; 2] {
            [0, 1].map(|i| rs.iter().map(|r| f(r, i)).collect())
        };
        let money = cfg.money_unit;
        let panel = HouseholdPanel {
            id,
            wage: member(&|r, i| cfg.wage_to_model(r.wage[i].unwrap_or(0.0))),
            leisure: member(&|r, i| cfg.time_to_model(leisure(r, i))),
            childcare: member(&|r, i| cfg.time_to_model(r.childcare[i].unwrap_or(0.0))),
            work: member(&|r, i| cfg.time_to_model(r.work[i].unwrap_or(0.0))),
            private_exp: member(&|r, i| r.private_exp[i].unwrap_or(0.0) / money),
            public_exp: col(&|r| r.public_exp.unwrap_or(0.0) / money),
            child_exp: col(&|r| r.child_exp.unwrap_or(0.0) / money),
            covariates,
        };
        report.kept_records += rs.len();
        panels.push(panel);
    }
    report.households = panels.len();
    (panels, report)
}

/// Records reproducing `panels` under `cfg`, with years `0..T` and income
/// equal to total expenditure. Covariates named `n_children` are copied
/// back; otherwise one child is recorded.
pub fn records_from_panels(panels: &[HouseholdPanel], cfg: &PipelineConfig) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for p in panels {
        let cov = |name: &str| cfg.covariates.iter().position(|c| c == name).map(|k| p.covariates[k]);
        for t in 0..p.periods() {
            let m = cfg.money_unit;
            let q = [p.private_exp[0][t] * m, p.private_exp[1][t] * m];
            let (pub_, c) = (p.public_exp[t] * m, p.child_exp[t] * m);
            out.push(RawRecord {
                household_id: p.id.clone(),
                year: t as i32,
                n_adults: Some(2.0),
                n_children: Some(cov("n_children").unwrap_or(1.0)),
                wage: [0, 1].map(|i| Some(cfg.wage_from_model(p.wage[i][t]))),
                work: [0, 1].map(|i| Some(cfg.time_from_model(p.work[i][t]))),
                childcare: [0, 1].map(|i| Some(cfg.time_from_model(p.childcare[i][t]))),
                private_exp: q.map(Some),
                public_exp: Some(pub_),
                child_exp: Some(c),
                income: Some(q[0] + q[1] + pub_ + c),
                age: [cov("age_1"), cov("age_2")],
                child_age_mean: cov("child_age_mean"),
                educ: [cov("educ_1"), cov("educ_2")],
                dwelling: cov("dwelling"),
            });
        }
    }
    out
}

/// Mean and standard deviation across households of a household-level average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

fn stat(v: &[f64]) -> Stat {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stat { mean, sd }
}

/// Summary statistics in survey units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub households: usize,
    pub periods: usize,
    pub wage: [Stat; 2],
    pub childcare: [Stat; 2],
    pub work: [Stat; 2],
    pub private_exp: [Stat; 2],
    pub public_exp: Stat,
    pub child_exp: Stat,
    /// Covariates by name.
    pub covariates: BTreeMap<String, Stat>,
}

/// Means and standard deviations across households of each household's
/// time-averaged value, in EUR per hour, hours per week and EUR per month.
pub fn summarize(panels: &[HouseholdPanel], cfg: &PipelineConfig) -> Option<Summary> {
    if panels.is_empty() {
        return None;
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let over = |f: &dyn Fn(&HouseholdPanel) -> f64| stat(&panels.iter().map(f).collect::<Vec<_>>());
    let m = cfg.money_unit;
    let covariates = cfg
        .covariates
        .iter()
        .enumerate()
        .filter(|(k, _)| panels.iter().all(|p| p.covariates.len() > *k))
        .map(|(k, name)| (name.clone(), over(&|p| p.covariates[k])))
        .collect();
    Some(Summary {
        households: panels.len(),
        periods: panels[0].periods(),
        wage: [0, 1].map(|i| over(&|p| cfg.wage_from_model(avg(&p.wage[i])))),
        childcare: [0, 1].map(|i| over(&|p| cfg.time_from_model(avg(&p.childcare[i])))),
        work: [0, 1].map(|i| over(&|p| cfg.time_from_model(avg(&p.work[i])))),
        private_exp: [0, 1].map(|i| over(&|p| avg(&p.private_exp[i]) * m)),
        public_exp: over(&|p| avg(&p.public_exp) * m),
        child_exp: over(&|p| avg(&p.child_exp) * m),
        covariates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, year: i32) -> RawRecord {
        RawRecord {
            household_id: id.into(),
            year,
            n_adults: Some(2.0),
            n_children: Some(2.0),
            wage: [Some(14.0), Some(12.0)],
            work: [Some(38.0), Some(24.0)],
            childcare: [Some(10.0), Some(17.0)],
            private_exp: [Some(360.0), Some(400.0)],
            public_exp: Some(2100.0),
            child_exp: Some(500.0),
            income: Some(5000.0),
            age: [Some(46.0), Some(44.0)],
            child_age_mean: Some(12.0),
            educ: [Some(1.0), Some(0.0)],
            dwelling: Some(1.0),
        }
    }

    fn household(id: &str, years: i32) -> Vec<RawRecord> {
        (0..years).map(|y| rec(id, 2008 + y)).collect()
    }

    #[test]
    fn negative_leisure_drops_the_household() {
        let mut rs = household("a", 3);
        rs[1].work[0] = Some(110.0);
        rs.extend(household("b", 3));
        let (panels, report) = construct_sample(&rs, &PipelineConfig::default());
        assert_eq!(panels.len(), 1);
        assert_eq!(report.dropped["negative_leisure"], 3);
        assert_eq!(report.kept_records + report.dropped.values().sum::<usize>(), report.input_records);
    }

    #[test]
    fn missing_childcare_gets_year_mean() {
        let mut rs = household("a", 3);
        rs.extend(household("b", 3));
        rs.extend(household("c", 3));
        rs[3].childcare[0] = Some(20.0);
        rs[6].childcare[0] = None;
        let (panels, report) = construct_sample(&rs, &PipelineConfig::default());
        assert_eq!(report.imputed_childcare, 1);
        let cfg = PipelineConfig::default();
        assert!((cfg.time_from_model(panels[2].childcare[0][0]) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn first_three_years_are_kept() {
        let rs = household("a", 5);
        let (panels, report) = construct_sample(&rs, &PipelineConfig::default());
        assert_eq!(panels[0].periods(), 3);
        assert_eq!(report.dropped["too_few_periods"], 2);
        let cfg = PipelineConfig::default();
        assert!((cfg.wage_from_model(panels[0].wage[0][0]) - 14.0).abs() < 1e-12);
        panels[0].validate().unwrap();
    }

    #[test]
    fn each_rule_is_tagged() {
        let mut rs = Vec::new();
        let mut single = rec("s", 2008);
        single.n_adults = Some(1.0);
        let mut no_wage = rec("w", 2008);
        no_wage.wage[1] = Some(0.0);
        let mut no_work = rec("h", 2008);
        no_work.work[0] = None;
        let mut rich = rec("x", 2008);
        rich.income = Some(100.0);
        rs.extend([single, no_wage, no_work, rich]);
        let mut short = household("t", 2);
        let mut nodemo = household("d", 3);
        nodemo[0].educ[1] = None;
        rs.append(&mut short);
        rs.append(&mut nodemo);
        let (panels, report) = construct_sample(&rs, &PipelineConfig::default());
        assert!(panels.is_empty());
        for (rule, n) in RULES.iter().zip([1, 1, 1, 1, 0, 2, 3]) {
            assert_eq!(report.dropped[*rule], n, "{rule}");
        }
    }

    #[test]
    fn pipeline_is_idempotent() {
        let mut rs = household("a", 4);
        rs.extend(household("b", 3));
        rs[5].child_exp = Some(640.5);
        let cfg = PipelineConfig::default();
        let (panels, _) = construct_sample(&rs, &cfg);
        let (again, report) = construct_sample(&records_from_panels(&panels, &cfg), &cfg);
        assert_eq!(report.imputed_childcare + report.imputed_child_exp, 0);
        for (a, b) in panels.iter().zip(&again) {
            for t in 0..3 {
                assert!((a.child_exp[t] - b.child_exp[t]).abs() < 1e-12);
                assert!((a.leisure[0][t] - b.leisure[0][t]).abs() < 1e-12);
                assert!((a.wage[1][t] - b.wage[1][t]).abs() < 1e-12);
            }
            assert_eq!(a.covariates, b.covariates);
        }
    }

    #[test]
    fn single_household_summary_has_zero_spread() {
        let (panels, _) = construct_sample(&household("a", 3), &PipelineConfig::default());
        let s = summarize(&panels, &PipelineConfig::default()).unwrap();
        assert_eq!(s.wage[0].sd, 0.0);
        assert!((s.wage[0].mean - 14.0).abs() < 1e-9);
        assert!((s.childcare[1].mean - 17.0).abs() < 1e-9);
    }

    #[test]
    fn summary_ignores_household_order() {
        let mut rs = household("a", 3);
        let mut b = household("b", 3);
        b.iter_mut().for_each(|r| r.wage[0] = Some(20.0));
        rs.extend(b);
        let cfg = PipelineConfig::default();
        let (mut panels, _) = construct_sample(&rs, &cfg);
        let s1 = summarize(&panels, &cfg).unwrap();
        panels.reverse();
        let s2 = summarize(&panels, &cfg).unwrap();
        assert!((s1.wage[0].mean - s2.wage[0].mean).abs() < 1e-12);
        assert!((s1.wage[0].sd - s2.wage[0].sd).abs() < 1e-12);
    }
}
