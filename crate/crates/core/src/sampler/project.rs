use super::init::solve_afriat;
use super::steps::production_ok;
use crate::household::{afriat_check, garp_terms, HouseholdPanel, LatentState, CHECK_TOL};

/// Projection of `st` onto time-invariant output elasticities with returns
/// to scale `rts`.
///
/// True input expenditures are reallocated to the state's average shares at
/// unchanged total, welfare becomes `E_t / (rts P_t)` at unchanged prices, and
/// `(U, lambda)` are re-solved. Returns `None` when the result leaves the
/// feasible set.
pub fn project_time_invariant(panel: &HouseholdPanel, st: &LatentState, rts: f64, lambda_cap: f64) -> Option<LatentState> {
    let n = panel.periods();
    let own = st.rts();
    if !(rts > 0.0 && rts <= 1.0 && own > 0.0) {
        return None;
    }
    let share: Vec<f64> = (0..3).map(|k| st.mean_elasticity(k) / own).collect();
    let mut out = st.clone();
    for t in 0..n {
        let e = st.expenditure(panel, t);
        for i in 0..2 {
            let h = share[i] * e / panel.wage[i][t];
            let l = 1.0 - panel.work[i][t] - h;
            if !(h > 0.0 && l > 0.0) {
                return None;
            }
            out.true_childcare[i][t] = h;
            out.true_leisure[i][t] = l;
        }
        out.true_child_exp[t] = share[2] * e;
        out.welfare[t] = e / (rts * st.price(t));
    }
    out.deduce(panel);
    for t in 0..n {
        let mut log_f = 0.0;
        for k in 0..3 {
            out.elasticity[k][t] = share[k] * rts;
            log_f += out.elasticity[k][t] * out.input(k, t).ln();
        }
        out.shock[t] = out.welfare[t].ln() - log_f;
    }
    if !production_ok(panel, &out) {
        return None;
    }
    for i in 0..2 {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|s| (0..n).map(|t| if s == t { 0.0 } else { garp_terms(panel, &out, i, s, t) }).collect())
            .collect();
        let (u, lambda) = solve_afriat(&a, lambda_cap)?;
        out.utility[i] = u;
        out.lambda[i] = lambda;
    }
    afriat_check(panel, &out, CHECK_TOL).ok()?.feasible.then_some(out)
}
