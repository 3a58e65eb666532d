use super::steps::production_ok;
use super::SamplerConfig;
use crate::error::{Error, Result};
use crate::household::{
    afriat_check, construct_rationalizing_prices, gapm_rts_upper_bound, garp_terms, HouseholdPanel, LatentState,
    RtsInterval, CHECK_TOL, DEFAULT_GRID_STEP,
};

/// Candidate starting returns to scale, `0.05, 0.10, ..., 1.00`.
pub const RTS_GRID: [f64; 20] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
    1.00,
];

/// Finds `(U, lambda)` with `U_s - U_t <= lambda_t a[s][t]` and
/// `lambda_t in [1, cap]`, or `None`.
///
/// Multipliers are tried on geometric profiles `lambda_t = B^(T-1-t)` and
/// `B^t`; utilities are shortest-path potentials, computed on slightly
/// tightened weights when that keeps the system consistent so that the
/// inequalities hold with slack.
pub fn solve_afriat(a: &[Vec<f64>], cap: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = a.len();
    if n == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    let mut profiles: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut b = 1.25f64;
    while b.powi(n as i32 - 1) <= cap && n > 1 {
        profiles.push((0..n).map(|t| b.powi((n - 1 - t) as i32)).collect());
        profiles.push((0..n).map(|t| b.powi(t as i32)).collect());
        b *= 1.25;
    }
    for lambda in profiles {
        let w = |shrink: f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|t| {
                    (0..n)
                        .map(|s| {
                            let v = lambda[t] * a[s][t];
                            v - shrink * v.abs()
                        })
                        .collect()
                })
                .collect()
        };
        for shrink in [1e-3, 1e-6, 0.0] {
            if let Some(u) = potentials(&w(shrink)) {
                return Some((u, lambda));
            }
        }
    }
    None
}

/// Potentials `U` with `U_s <= U_t + w[t][s]`, or `None` on a negative cycle.
fn potentials(w: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = w.len();
    let mut d: Vec<Vec<f64>> = w.to_vec();
    for (t, row) in d.iter_mut().enumerate() {
        row[t] = 0.0;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    if (0..n).any(|i| d[i][i] < 0.0) {
        return None;
    }
    Some((0..n).map(|s| (0..n).map(|t| d[t][s]).fold(0.0, f64::min)).collect())
}

/// Copy of `panel` with inputs rescaled to time-invariant expenditure shares:
/// each input's share of total expenditure is replaced by its time average.
fn time_invariant_inputs(panel: &HouseholdPanel) -> Option<HouseholdPanel> {
    let n = panel.periods();
    let mut share = [0.0; 3];
    for t in 0..n {
        let x = panel.input_expenditures(t);
        let e = panel.expenditure(t);
        for k in 0..3 {
            share[k] += x[k] / e / n as f64;
        }
    }
    let mut out = panel.clone();
    for t in 0..n {
        let e = panel.expenditure(t);
        for i in 0..2 {
            let h = share[i] * e / panel.wage[i][t];
            let l = 1.0 - panel.work[i][t] - h;
            if !(h > 0.0 && l > 0.0) {
                return None;
            }
            out.childcare[i][t] = h;
            out.leisure[i][t] = l;
        }
        out.child_exp[t] = share[2] * e;
        if !(out.child_exp[t] > 0.0) {
            return None;
        }
    }
    Some(out)
}

fn build_state(panel: &HouseholdPanel, inputs: &HouseholdPanel, rts: f64, cap: f64) -> Option<LatentState> {
    let prices = construct_rationalizing_prices(inputs, rts).ok()?;
    let mut st = prices.state(inputs);
    if !production_ok(panel, &st) {
        return None;
    }
    let n = panel.periods();
    for i in 0..2 {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|s| (0..n).map(|t| if s == t { 0.0 } else { garp_terms(panel, &st, i, s, t) }).collect())
            .collect();
        let (u, lambda) = solve_afriat(&a, cap)?;
        st.utility[i] = u;
        st.lambda[i] = lambda;
    }
    let report = afriat_check(panel, &st, CHECK_TOL).ok()?;
    report.feasible.then_some(st)
}

/// Constructs a feasible starting state.
///
/// True inputs start at the observed ones. Welfare prices follow the
/// constructive price recursion at a candidate returns to scale and `(U,
/// lambda)` solve the Afriat system for those prices. Candidates are `rts0`
/// first, then [`RTS_GRID`] within the profit-maximisation bound, nearest to
/// `rts0` (or 0.5) first. When the observed inputs fail the production
/// inequalities at every candidate, the search is repeated with inputs
/// rescaled to time-invariant expenditure shares.
pub fn initialize(panel: &HouseholdPanel, rts0: Option<f64>, cfg: &SamplerConfig) -> Result<LatentState> {
    panel.validate()?;
    let n = panel.periods();
    let bound = gapm_rts_upper_bound(panel, DEFAULT_GRID_STEP).ok_or_else(|| {
        Error::NoFeasibleRts(format!("household {}: profit maximisation fails at every RTS", panel.id))
    })?;
    let hint = rts0.or(cfg.rts0).unwrap_or(if n == 1 { 1.0 } else { 0.5 });
    let mut candidates: Vec<f64> = Vec::new();
    if bound.contains(hint) {
        candidates.push(hint);
    }
    let mut grid: Vec<f64> = RTS_GRID.iter().copied().filter(|r| bound.contains(*r)).collect();
    grid.sort_by(|a, b| (a - hint).abs().total_cmp(&(b - hint).abs()));
    candidates.extend(grid.into_iter().filter(|r| *r != hint));
    if candidates.is_empty() {
        let mid = 0.5 * (bound.lo + bound.hi);
        if RtsInterval::contains(&bound, mid) {
            candidates.push(mid);
        }
    }
    for &r in &candidates {
        if let Some(st) = build_state(panel, panel, r, cfg.lambda_cap) {
            return Ok(st);
        }
    }
    if let Some(adjusted) = time_invariant_inputs(panel) {
        for &r in &candidates {
            if let Some(st) = build_state(panel, &adjusted, r, cfg.lambda_cap) {
                return Ok(st);
            }
        }
    }
    Err(Error::NoFeasibleRts(format!(
        "household {}: no candidate RTS yields a feasible state",
        panel.id
    )))
}

/// Starting state that attributes the observed inputs' departure from
/// time-invariant expenditure shares to measurement error.
///
/// Time-invariant shares satisfy the Cobb-Douglas first-order conditions at
/// every returns to scale, so the production inequalities hold whatever the
/// observed inputs; this start exists even when the observed inputs refute
/// profit maximisation.
pub fn initialize_error_start(panel: &HouseholdPanel, rts0: Option<f64>, cfg: &SamplerConfig) -> Result<LatentState> {
    panel.validate()?;
    let hint = rts0.or(cfg.rts0).unwrap_or(if panel.periods() == 1 { 1.0 } else { 0.5 });
    let mut candidates: Vec<f64> = RTS_GRID.to_vec();
    candidates.sort_by(|a, b| (a - hint).abs().total_cmp(&(b - hint).abs()));
    if let Some(adjusted) = time_invariant_inputs(panel) {
        for &r in std::iter::once(&hint).chain(&candidates) {
            if let Some(st) = build_state(panel, &adjusted, r, cfg.lambda_cap) {
                return Ok(st);
            }
        }
    }
    Err(Error::NoFeasibleRts(format!(
        "household {}: no measurement-error start yields a feasible state",
        panel.id
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::household::fixtures::{panel, simple_panel};

    #[test]
    fn afriat_solve_on_forward_only_relation() {
        // Later bundles are strictly more expensive at earlier prices.
        let a = vec![vec![0.0, -1.0, -2.0], vec![3.0, 0.0, -0.5], vec![1.0, 2.0, 0.0]];
        let (u, lambda) = solve_afriat(&a, 1e4).unwrap();
        for t in 0..3 {
            assert!((1.0..=1e4).contains(&lambda[t]));
            for s in 0..3 {
                if s != t {
                    assert!(u[s] - u[t] <= lambda[t] * a[s][t] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn afriat_solve_detects_cycle() {
        let a = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(solve_afriat(&a, 1e4).is_none());
    }

    #[test]
    fn single_period_starts_at_unit_rts() {
        let p = simple_panel(1);
        let st = initialize(&p, None, &SamplerConfig::default()).unwrap();
        assert!((st.rts() - 1.0).abs() < 1e-12);
        assert!(st.measurement_errors(&p).iter().all(|m| *m == 0.0));
    }

    #[test]
    fn multi_period_state_is_feasible() {
        let p = simple_panel(4);
        let st = initialize(&p, None, &SamplerConfig::default()).unwrap();
        assert!(afriat_check(&p, &st, CHECK_TOL).unwrap().feasible);
    }

    #[test]
    fn refuted_profit_maximisation_is_reported() {
        // Both cross-period cost differences are negative.
        let q = panel(
            [vec![1.0, 6.0], vec![1.0, 6.0]],
            [vec![0.1, 0.2], vec![0.1, 0.2]],
            [vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 1.0],
            vec![5.0, 4.0],
        );
        assert!(gapm_rts_upper_bound(&q, DEFAULT_GRID_STEP).is_none());
        assert!(matches!(
            initialize(&q, None, &SamplerConfig::default()),
            Err(Error::NoFeasibleRts(_))
        ));
        let st = initialize_error_start(&q, None, &SamplerConfig::default()).unwrap();
        assert!(afriat_check(&q, &st, CHECK_TOL).unwrap().feasible);
        assert!(st.measurement_errors(&q).iter().any(|m| m.abs() > 1e-6));
    }
}
