use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::population::{GroundTruth, Population};
use crate::error::Result;
use crate::household::{garp_check, HouseholdPanel, LatentState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecificationReport {
    pub households: usize,
    /// Households whose utility-side system is infeasible when shocks are forced to zero.
    pub no_shock_infeasible: usize,
    /// Households infeasible at the true, shock-inclusive latent state.
    pub with_shock_infeasible: usize,
    pub no_shock_fraction: f64,
    pub with_shock_fraction: f64,
}

/// Latent state implied by the no-shock restriction: welfare is production
/// at the true inputs, the welfare price is `E / (RTS W)`, and personalized
/// welfare prices keep their true shares.
pub fn no_shock_state(panel: &HouseholdPanel, truth: &GroundTruth) -> LatentState {
    let mut st = truth.state();
    for t in 0..st.periods() {
        let z = [st.true_childcare[0][t], st.true_childcare[1][t], st.true_child_exp[t]];
        let welfare = (0..3).map(|k| truth.alpha[k] * z[k].ln()).sum::<f64>().exp();
        let price = st.expenditure(panel, t) / (truth.rts * welfare);
        let scale = price / st.price(t);
        for i in 0..2 {
            st.lindahl_welfare[i][t] *= scale;
        }
        st.welfare[t] = welfare;
        st.shock[t] = 0.0;
    }
    st
}

/// Fraction of households whose Afriat system has no solution under the
/// no-shock restriction, next to the same fraction at the true state.
/// Feasibility of the utility inequalities is decided by GARP at the given
/// prices; the production inequalities hold by construction in both cases.
pub fn misspecification_demo(pop: &Population) -> Result<MisspecificationReport> {
    let flags: Vec<(bool, bool)> = pop
        .panels
        .par_iter()
        .zip(&pop.truths)
        .map(|(p, g)| {
            let truth_panel = p.with_true_inputs(&g.state());
            let with = garp_check(&truth_panel, &g.state())?.passes;
            let without = garp_check(&truth_panel, &no_shock_state(&truth_panel, g))?.passes;
            Ok((!without, !with))
        })
        .collect::<Result<_>>()?;
    let n = flags.len();
    let no_shock_infeasible = flags.iter().filter(|f| f.0).count();
    let with_shock_infeasible = flags.iter().filter(|f| f.1).count();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(MisspecificationReport {
        households: n,
        no_shock_infeasible,
        with_shock_infeasible,
        no_shock_fraction: frac(no_shock_infeasible),
        with_shock_fraction: frac(with_shock_infeasible),
    })
}
