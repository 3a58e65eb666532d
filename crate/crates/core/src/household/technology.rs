use super::{HouseholdPanel, LatentState};
use crate::error::{Error, Result};

/// Which inputs to use: the panel's observed ones or a state's true ones.
#[derive(Debug, Clone, Copy)]
pub enum Inputs<'a> {
    Observed,
    True(&'a LatentState),
}

impl Inputs<'_> {
    fn expenditures(&self, panel: &HouseholdPanel, t: usize) -> [f64; 3] {
        match self {
            Inputs::Observed => panel.input_expenditures(t),
            Inputs::True(st) => st.input_expenditures(panel, t),
        }
    }
}

/// Accepts returns to scale in `(0, 1]`.
pub fn check_rts(rts: f64) -> Result<()> {
    if rts > 0.0 && rts <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRts(rts))
    }
}

/// Revenue `P_t W_t = E_t / RTS` implied by profit maximisation.
pub fn implied_revenue(panel: &HouseholdPanel, rts: f64, t: usize, inputs: Inputs<'_>) -> Result<f64> {
    check_rts(rts)?;
    if t >= panel.periods() {
        return Err(Error::Dimension(format!("period {t} out of range")));
    }
    Ok(inputs.expenditures(panel, t).iter().sum::<f64>() / rts)
}

/// Output elasticities in period `t`: input expenditure over `P_t W_t`.
pub fn cobb_douglas_elasticities(panel: &HouseholdPanel, state: &LatentState, t: usize) -> Result<[f64; 3]> {
    state.check_dimensions(panel)?;
    let pw = state.revenue(t);
    if !(pw > 0.0) {
        return Err(Error::ZeroRevenue(t));
    }
    Ok(state.input_expenditures(panel, t).map(|x| x / pw))
}

/// Largest deviation from proportional input-expenditure growth between any
/// two periods, measured as `|log r_k - log r_k'|` with `r_k` the ratio of
/// input-`k` expenditure across the two periods.
pub fn time_invariance_residual(panel: &HouseholdPanel) -> Result<f64> {
    let n = panel.periods();
    let mut logs = Vec::with_capacity(n);
    for t in 0..n {
        let x = panel.input_expenditures(t);
        for (k, v) in x.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(Error::ZeroExpenditure { input: k, period: t });
            }
        }
        logs.push(x.map(f64::ln));
    }
    let mut worst = 0.0f64;
    for s in 0..n {
        for t in (s + 1)..n {
            let r: Vec<f64> = (0..3).map(|k| logs[s][k] - logs[t][k]).collect();
            for k in 0..3 {
                for kk in (k + 1)..3 {
                    worst = worst.max((r[k] - r[kk]).abs());
                }
            }
        }
    }
    Ok(worst)
}
