//! Domain types and deterministic model logic for a two-adult household.

mod bounds;
mod checks;
mod prices;
mod recovery;
mod technology;

pub use bounds::{garp_rts_bounds, gapm_rts_upper_bound, RtsInterval, DEFAULT_GRID_STEP};
pub use checks::{
    afriat_check, gapm_check, garp_check, garp_terms, AfriatReport, GarpCycle, GarpReport,
    Relation, RevealedPreferenceRelation, Violation,
};
pub use prices::{construct_rationalizing_prices, RationalizingPrices, PRICE_MARGIN};
pub use recovery::{recover_log_production, CrossSectionObs, RecoveryConfig};
pub use technology::{
    check_rts, cobb_douglas_elasticities, implied_revenue,
    time_invariance_residual, Inputs,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used whenever a constructed value is verified.
pub const CHECK_TOL: f64 = 1e-9;

/// Observed data for one couple over `T` periods.
///
/// Time variables are fractions of the per-period time budget. Index `[0]`
/// is the father, `[1]` the mother.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdPanel {
    pub id: String,
    pub wage: [Vec<f64>; 2],
    pub leisure: [Vec<f64>; 2],
    pub childcare: [Vec<f64>; 2],
    pub work: [Vec<f64>; 2],
    pub private_exp: [Vec<f64>; 2],
    pub public_exp: Vec<f64>,
    pub child_exp: Vec<f64>,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

impl HouseholdPanel {
    pub fn periods(&self) -> usize {
        self.public_exp.len()
    }

    /// Checks dimensions, positivity and the normalised time identity.
    pub fn validate(&self) -> Result<()> {
        let t = self.periods();
        let member_fields: [(&str, &[Vec<f64>; 2]); 5] = [
            ("wage", &self.wage),
            ("leisure", &self.leisure),
            ("childcare", &self.childcare),
            ("work", &self.work),
            ("private_exp", &self.private_exp),
        ];
        for (name, field) in member_fields {
            for v in field.iter() {
                if v.len() != t {
                    return Err(Error::Dimension(format!(
                        "{name} has {} periods, expected {t}",
                        v.len()
                    )));
                }
            }
        }
        if self.child_exp.len() != t {
            return Err(Error::Dimension(format!(
                "child_exp has {} periods, expected {t}",
                self.child_exp.len()
            )));
        }
        for s in 0..t {
            for i in 0..2 {
                positive("wage", self.wage[i][s], s)?;
                positive("childcare", self.childcare[i][s], s)?;
                positive("private_exp", self.private_exp[i][s], s)?;
                let total = self.leisure[i][s] + self.work[i][s] + self.childcare[i][s];
                if (total - 1.0).abs() > CHECK_TOL {
                    return Err(Error::Spec(format!(
                        "time identity violated for member {} in period {s}: {total}",
                        i + 1
                    )));
                }
            }
            positive("public_exp", self.public_exp[s], s)?;
            positive("child_exp", self.child_exp[s], s)?;
        }
        Ok(())
    }

    /// Observed input expenditures `(w1 h1, w2 h2, c)` in period `t`.
    pub fn input_expenditures(&self, t: usize) -> [f64; 3] {
        [
            self.wage[0][t] * self.childcare[0][t],
            self.wage[1][t] * self.childcare[1][t],
            self.child_exp[t],
        ]
    }

    /// Observed total input expenditure `E_t`.
    pub fn expenditure(&self, t: usize) -> f64 {
        self.input_expenditures(t).iter().sum()
    }

    /// Copy of the panel with the observed inputs replaced by `state`'s true inputs.
    pub fn with_true_inputs(&self, state: &LatentState) -> HouseholdPanel {
        let mut p = self.clone();
        p.childcare = state.true_childcare.clone();
        p.leisure = state.true_leisure.clone();
        p.child_exp = state.true_child_exp.clone();
        p
    }
}

fn positive(field: &'static str, v: f64, period: usize) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { field, period })
    }
}

/// One complete solution of the household's Afriat and first-order system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub utility: [Vec<f64>; 2],
    pub lambda: [Vec<f64>; 2],
    /// Personalized prices for public expenditure; the two shares sum to one.
    pub lindahl_public: [Vec<f64>; 2],
    /// Personalized prices for child welfare.
    pub lindahl_welfare: [Vec<f64>; 2],
    pub welfare: Vec<f64>,
    pub true_leisure: [Vec<f64>; 2],
    pub true_childcare: [Vec<f64>; 2],
    pub true_child_exp: Vec<f64>,
    /// Output elasticities `alpha[k][t]` for father time, mother time, expenditure.
    pub elasticity: [Vec<f64>; 3],
    pub shock: Vec<f64>,
}

impl LatentState {
    pub fn periods(&self) -> usize {
        self.welfare.len()
    }

    /// Total welfare price `P_t = P^1_t + P^2_t`.
    pub fn price(&self, t: usize) -> f64 {
        self.lindahl_welfare[0][t] + self.lindahl_welfare[1][t]
    }

    /// Revenue `P_t W_t`.
    pub fn revenue(&self, t: usize) -> f64 {
        self.price(t) * self.welfare[t]
    }

    /// True input expenditures `(w1 h1*, w2 h2*, c*)`.
    pub fn input_expenditures(&self, panel: &HouseholdPanel, t: usize) -> [f64; 3] {
        [
            panel.wage[0][t] * self.true_childcare[0][t],
            panel.wage[1][t] * self.true_childcare[1][t],
            self.true_child_exp[t],
        ]
    }

    pub fn expenditure(&self, panel: &HouseholdPanel, t: usize) -> f64 {
        self.input_expenditures(panel, t).iter().sum()
    }

    /// Measurement error in member `i`'s childcare, `observed - true`.
    pub fn me_childcare(&self, panel: &HouseholdPanel, i: usize, t: usize) -> f64 {
        panel.childcare[i][t] - self.true_childcare[i][t]
    }

    /// Measurement error in child expenditure, `observed - true`.
    pub fn me_child_exp(&self, panel: &HouseholdPanel, t: usize) -> f64 {
        panel.child_exp[t] - self.true_child_exp[t]
    }

    /// Stacked measurement errors: father childcare, mother childcare, child expenditure.
    pub fn measurement_errors(&self, panel: &HouseholdPanel) -> Vec<f64> {
        let t = self.periods();
        let mut out = Vec::with_capacity(3 * t);
        for i in 0..2 {
            out.extend((0..t).map(|s| self.me_childcare(panel, i, s)));
        }
        out.extend((0..t).map(|s| self.me_child_exp(panel, s)));
        out
    }

    /// Household-level returns to scale: the time average of `sum_k alpha_k`.
    pub fn rts(&self) -> f64 {
        let t = self.periods();
        (0..t)
            .map(|s| self.elasticity.iter().map(|a| a[s]).sum::<f64>())
            .sum::<f64>()
            / t as f64
    }

    /// Time average of `alpha_k`.
    pub fn mean_elasticity(&self, k: usize) -> f64 {
        self.elasticity[k].iter().sum::<f64>() / self.periods() as f64
    }

    /// Production level net of the shock, `F_t = W_t exp(-eps_t)`.
    pub fn production(&self, t: usize) -> f64 {
        self.welfare[t] * (-self.shock[t]).exp()
    }

    /// True input quantity `k`: father childcare, mother childcare, child expenditure.
    pub fn input(&self, k: usize, t: usize) -> f64 {
        match k {
            0 | 1 => self.true_childcare[k][t],
            _ => self.true_child_exp[t],
        }
    }

    /// Recomputes elasticities and shocks from prices, welfare and true inputs.
    pub fn deduce(&mut self, panel: &HouseholdPanel) {
        for t in 0..self.periods() {
            let pw = self.revenue(t);
            let x = self.input_expenditures(panel, t);
            let z = [
                self.true_childcare[0][t],
                self.true_childcare[1][t],
                self.true_child_exp[t],
            ];
            let mut log_f = 0.0;
            for k in 0..3 {
                self.elasticity[k][t] = x[k] / pw;
                log_f += self.elasticity[k][t] * z[k].ln();
            }
            self.shock[t] = self.welfare[t].ln() - log_f;
        }
    }

    pub fn check_dimensions(&self, panel: &HouseholdPanel) -> Result<()> {
        let t = panel.periods();
        let ok = self.welfare.len() == t
            && self.true_child_exp.len() == t
            && self.shock.len() == t
            && self.utility.iter().all(|v| v.len() == t)
            && self.lambda.iter().all(|v| v.len() == t)
            && self.lindahl_public.iter().all(|v| v.len() == t)
            && self.lindahl_welfare.iter().all(|v| v.len() == t)
            && self.true_leisure.iter().all(|v| v.len() == t)
            && self.true_childcare.iter().all(|v| v.len() == t)
            && self.elasticity.iter().all(|v| v.len() == t);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "latent state does not match a panel with {t} periods"
            )))
        }
    }

    /// Number of scalars in [`LatentState::to_flat`].
    pub fn flat_len(periods: usize) -> usize {
        periods * 18
    }

    /// Flattens the state in a fixed field order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::flat_len(self.periods()));
        for pair in [
            &self.utility,
            &self.lambda,
            &self.lindahl_public,
            &self.lindahl_welfare,
        ] {
            out.extend(pair.iter().flatten());
        }
        out.extend(&self.welfare);
        out.extend(self.true_leisure.iter().flatten());
        out.extend(self.true_childcare.iter().flatten());
        out.extend(&self.true_child_exp);
        out.extend(self.elasticity.iter().flatten());
        out.extend(&self.shock);
        out
    }

    /// Inverse of [`LatentState::to_flat`].
    pub fn from_flat(periods: usize, v: &[f64]) -> Result<LatentState> {
        if v.len() != Self::flat_len(periods) {
            return Err(Error::Dimension(format!(
                "flat state has {} values, expected {}",
                v.len(),
                Self::flat_len(periods)
            )));
        }
        let mut chunks = v.chunks(periods).map(|c| c.to_vec());
        let mut take = || chunks.next().expect("length checked");
        let utility = [take(), take()];
        let lambda = [take(), take()];
        let lindahl_public = [take(), take()];
        let lindahl_welfare = [take(), take()];
        let welfare = take();
        let true_leisure = [take(), take()];
        let true_childcare = [take(), take()];
        let true_child_exp = take();
        let elasticity = [take(), take(), take()];
        let shock = take();
        Ok(LatentState {
            utility,
            lambda,
            lindahl_public,
            lindahl_welfare,
            welfare,
            true_leisure,
            true_childcare,
            true_child_exp,
            elasticity,
            shock,
        })
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn validate_accepts_consistent_panel() {
        simple_panel(3).validate().unwrap();
    }

    #[test]
    fn validate_rejects_broken_time_identity() {
        let mut p = simple_panel(2);
        p.leisure[0][1] += 0.01;
        assert!(matches!(p.validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn validate_rejects_nonpositive_wage() {
        let mut p = simple_panel(2);
        p.wage[1][0] = 0.0;
        assert!(matches!(
            p.validate(),
            Err(Error::NonPositive { field: "wage", period: 0 })
        ));
    }

    #[test]
    fn flat_round_trip() {
        let p = simple_panel(3);
        let st = state_for(&p, &[2.0, 3.0, 1.0], &[50.0, 40.0, 60.0]);
        let flat = st.to_flat();
        assert_eq!(flat.len(), LatentState::flat_len(3));
        assert_eq!(LatentState::from_flat(3, &flat).unwrap(), st);
    }

    #[test]
    fn deduce_inverts_production_equation() {
        let p = simple_panel(3);
        let st = state_for(&p, &[2.0, 3.0, 1.0], &[50.0, 40.0, 60.0]);
        for t in 0..3 {
            let z = [p.childcare[0][t], p.childcare[1][t], p.child_exp[t]];
            let w: f64 = (0..3)
                .map(|k| st.elasticity[k][t] * z[k].ln())
                .sum::<f64>()
                + st.shock[t];
            assert!((w.exp() - st.welfare[t]).abs() <= 1e-12 * st.welfare[t]);
        }
    }
}
