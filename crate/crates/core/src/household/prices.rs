use serde::{Deserialize, Serialize};

use super::technology::check_rts;
use super::{HouseholdPanel, LatentState};
use crate::error::Result;

/// Relative margin applied when a strict lower bound must be met by construction.
pub const PRICE_MARGIN: f64 = 1.01;

/// Welfare prices and welfare levels under which GARP holds at a given
/// returns to scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalizingPrices {
    pub rts: f64,
    /// Total welfare price `P_t`; each member pays half.
    pub price: Vec<f64>,
    /// Welfare `W_t = E_t / (RTS P_t)`.
    pub welfare: Vec<f64>,
}

impl RationalizingPrices {
    /// Latent state carrying these prices, observed inputs as true inputs,
    /// equal Lindahl shares, elasticities and shocks from the production
    /// equation, unit multipliers and zero utilities.
    pub fn state(&self, panel: &HouseholdPanel) -> LatentState {
        let t = panel.periods();
        let half: Vec<f64> = self.price.iter().map(|p| 0.5 * p).collect();
        let mut st = LatentState {
            utility: [vec![0.0; t], vec![0.0; t]],
            lambda: [vec![1.0; t], vec![1.0; t]],
            lindahl_public: [vec![0.5; t], vec![0.5; t]],
            lindahl_welfare: [half.clone(), half],
            welfare: self.welfare.clone(),
            true_leisure: panel.leisure.clone(),
            true_childcare: panel.childcare.clone(),
            true_child_exp: panel.child_exp.clone(),
            elasticity: [vec![0.0; t], vec![0.0; t], vec![0.0; t]],
            shock: vec![0.0; t],
        };
        st.deduce(panel);
        st
    }
}

/// Builds welfare prices that make GARP hold at returns to scale `rts`.
///
/// Starting from `P_T = 1` and moving backwards, each `P_t` is set to
/// [`PRICE_MARGIN`] times the largest lower bound that makes every later
/// bundle strictly more expensive at period-`t` prices for both members.
/// Revealed preference can then only point forward in time, so no cycle
/// closes.
pub fn construct_rationalizing_prices(panel: &HouseholdPanel, rts: f64) -> Result<RationalizingPrices> {
    check_rts(rts)?;
    let n = panel.periods();
    let e: Vec<f64> = (0..n).map(|t| panel.expenditure(t)).collect();
    // X^i_{st} at equal public-good shares: bundle s valued at period-t prices.
    let x = |i: usize, s: usize, t: usize| {
        panel.wage[i][t] * (panel.leisure[i][s] - panel.leisure[i][t])
            + (panel.private_exp[i][s] - panel.private_exp[i][t])
            + 0.5 * (panel.public_exp[s] - panel.public_exp[t])
    };
    let mut price = vec![1.0; n];
    for t in (0..n.saturating_sub(1)).rev() {
        let mut bound = 1.0f64;
        for later in (t + 1)..n {
            for i in 0..2 {
                // a^i_{later,t} = X^i_{later,t} + (E_later P_t / P_later - E_t) / (2 R) > 0
                let b = price[later] * (e[t] - 2.0 * rts * x(i, later, t)) / e[later];
                bound = bound.max(b);
            }
        }
        price[t] = PRICE_MARGIN * bound;
    }
    let welfare = (0..n).map(|t| e[t] / (rts * price[t])).collect();
    Ok(RationalizingPrices { rts, price, welfare })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::simple_panel;
    use super::super::{garp_check, CHECK_TOL};
    use super::*;

    #[test]
    fn single_period_price_is_one() {
        let p = simple_panel(1);
        let r = construct_rationalizing_prices(&p, 0.4).unwrap();
        assert_eq!(r.price, vec![1.0]);
    }

    #[test]
    fn garp_holds_at_several_rts() {
        let p = simple_panel(4);
        for rts in [0.05, 0.3, 0.5, 0.9, 1.0] {
            let r = construct_rationalizing_prices(&p, rts).unwrap();
            let st = r.state(&p);
            assert!(garp_check(&p, &st).unwrap().passes, "rts = {rts}");
            for t in 0..4 {
                let sum: f64 = st.elasticity.iter().map(|a| a[t]).sum();
                assert!((sum - rts).abs() < CHECK_TOL);
            }
        }
    }

    #[test]
    fn invalid_rts_rejected() {
        assert!(construct_rationalizing_prices(&simple_panel(2), 0.0).is_err());
        assert!(construct_rationalizing_prices(&simple_panel(2), 1.2).is_err());
    }
}
