use serde::{Deserialize, Serialize};

use super::HouseholdPanel;
use crate::error::{Error, Result};

/// Default step for the multi-period returns-to-scale sweep.
pub const DEFAULT_GRID_STEP: f64 = 1e-4;

/// A sub-interval of `(0, 1]`. Endpoint openness is not tracked; `lo = 0`
/// means the interval is open at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtsInterval {
    pub lo: f64,
    pub hi: f64,
}

impl RtsInterval {
    pub const FULL: RtsInterval = RtsInterval { lo: 0.0, hi: 1.0 };

    pub fn contains(&self, r: f64) -> bool {
        r > self.lo && r <= self.hi
    }

    pub fn intersect(&self, other: &RtsInterval) -> Option<RtsInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(RtsInterval { lo, hi })
    }
}

/// Cross-period cost difference `w_t . (h_s - h_t) + (c_s - c_t)`.
fn delta(panel: &HouseholdPanel, s: usize, t: usize) -> f64 {
    panel.wage[0][t] * (panel.childcare[0][s] - panel.childcare[0][t])
        + panel.wage[1][t] * (panel.childcare[1][s] - panel.childcare[1][t])
        + (panel.child_exp[s] - panel.child_exp[t])
}

/// Returns-to-scale values for which a pair of periods admits positive
/// production levels satisfying profit maximisation:
/// `(1 + R a)(1 + R b) >= 1` with both factors positive.
fn pair_interval(a: f64, b: f64) -> Option<RtsInterval> {
    let full = Some(RtsInterval::FULL);
    let upper = |hi: f64| (hi > 0.0).then_some(RtsInterval { lo: 0.0, hi: hi.min(1.0) });
    match (a >= 0.0, b >= 0.0) {
        (true, true) => full,
        (false, false) => None,
        _ => {
            let (pos, neg) = if a >= 0.0 { (a, b) } else { (b, a) };
            if pos == 0.0 {
                return None;
            }
            // R (a + b + R a b) >= 0 with a b < 0 gives R <= 1/|neg| - 1/pos,
            // which already keeps 1 + R neg positive.
            upper(1.0 / neg.abs() - 1.0 / pos)
        }
    }
}

/// Whether some positive production levels satisfy profit maximisation at
/// returns to scale `r`: no negative cycle in the graph with edge weights
/// `log(1 + r delta_st / E_t)`.
fn feasible_at(panel: &HouseholdPanel, r: f64) -> bool {
    let n = panel.periods();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for t in 0..n {
        d[t][t] = 0.0;
        let e = panel.expenditure(t);
        for s in 0..n {
            if s == t {
                continue;
            }
            let arg = 1.0 + r * delta(panel, s, t) / e;
            if arg <= 0.0 {
                return false;
            }
            // log F_s - log F_t <= log(arg): edge t -> s.
            d[t][s] = arg.ln();
        }
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
    (0..n).all(|i| d[i][i] >= -1e-14)
}

fn refine(panel: &HouseholdPanel, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        if (inside - outside).abs() <= 1e-15 {
            break;
        }
        let mid = 0.5 * (inside + outside);
        if feasible_at(panel, mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Set of returns to scale compatible with profit maximisation (GAPM).
///
/// Two periods are solved in closed form; longer panels are swept over a grid
/// of the given step and the boundary is refined by bisection.
pub fn gapm_rts_upper_bound(panel: &HouseholdPanel, grid_step: f64) -> Option<RtsInterval> {
    let n = panel.periods();
    if n < 2 {
        return Some(RtsInterval::FULL);
    }
    if n == 2 {
        let a = delta(panel, 1, 0) / panel.expenditure(0);
        let b = delta(panel, 0, 1) / panel.expenditure(1);
        return pair_interval(a, b);
    }
    let mut pairwise = RtsInterval::FULL;
    for t in 0..n {
        for s in (t + 1)..n {
            let a = delta(panel, s, t) / panel.expenditure(t);
            let b = delta(panel, t, s) / panel.expenditure(s);
            pairwise = pairwise.intersect(&pair_interval(a, b)?)?;
        }
    }
    let step = grid_step.clamp(1e-9, 1.0);
    let steps = (1.0 / step).ceil() as usize;
    let grid = (1..=steps).map(|k| (k as f64 * step).min(1.0));
    let mut first: Option<(f64, f64)> = None;
    let mut last: Option<(f64, f64)> = None;
    let mut prev = 0.0;
    let mut prev_ok = false;
    for r in grid {
        let ok = pairwise.contains(r) && feasible_at(panel, r);
        if ok && first.is_none() {
            first = Some((r, prev));
        }
        if !ok && prev_ok {
            last = Some((prev, r));
        }
        if ok && r >= 1.0 {
            last = Some((1.0, 1.0));
        }
        prev = r;
        prev_ok = ok;
    }
    let (lo_in, lo_out) = first?;
    let lo = if lo_out <= 0.0 { 0.0 } else { refine(panel, lo_in, lo_out) };
    let (hi_in, hi_out) = last.unwrap_or((lo_in, lo_in));
    let hi = if hi_out >= 1.0 && hi_in >= 1.0 { 1.0 } else { refine(panel, hi_in, hi_out) };
    Some(RtsInterval { lo, hi })
}

/// Set `{R : A + B / R > 0} ∩ (0, 1]`.
fn positive_part(a: f64, b: f64) -> Option<RtsInterval> {
    if b > 0.0 {
        if a >= 0.0 {
            Some(RtsInterval::FULL)
        } else {
            let hi = b / -a;
            (hi > 0.0).then_some(RtsInterval { lo: 0.0, hi: hi.min(1.0) })
        }
    } else if a > 0.0 {
        let lo = -b / a;
        (lo < 1.0).then_some(RtsInterval { lo: lo.max(0.0), hi: 1.0 })
    } else {
        None
    }
}

/// Returns-to-scale values at which GARP holds for a two-period panel when
/// the welfare-price ratio `P_t / P_s` is confined to `[1/rho, rho]`.
///
/// Uses the aggregate relation
/// `a_st = sum_i X^i_st + (E_s P_t/P_s - E_t) / R` with equal Lindahl
/// shares; GARP fails only if both aggregate comparisons are non-positive
/// with at least one strict, so the admissible set is the union of the sets
/// where either comparison can be made positive. The result is sorted and
/// may contain two disjoint pieces.
pub fn garp_rts_bounds(panel: &HouseholdPanel, ratio_bound: f64) -> Result<Vec<RtsInterval>> {
    if !(ratio_bound >= 1.0) {
        return Err(Error::InvalidRatioBound(ratio_bound));
    }
    if panel.periods() != 2 {
        return Err(Error::Dimension(format!(
            "garp_rts_bounds needs exactly 2 periods, got {}",
            panel.periods()
        )));
    }
    let x = |s: usize, t: usize| -> f64 {
        (0..2)
            .map(|i| {
                panel.wage[i][t] * (panel.leisure[i][s] - panel.leisure[i][t])
                    + (panel.private_exp[i][s] - panel.private_exp[i][t])
                    + 0.5 * (panel.public_exp[s] - panel.public_exp[t])
            })
            .sum()
    };
    let (s, t) = (1usize, 0usize);
    let (es, et) = (panel.expenditure(s), panel.expenditure(t));
    // a_st grows with P_t/P_s, a_ts shrinks with it.
    let (xst, xts) = (x(s, t), x(t, s));
    if xst == 0.0 && xts == 0.0 && et / es <= ratio_bound && es / et <= ratio_bound {
        // Some admissible ratio makes both comparisons exactly zero.
        return Ok(vec![RtsInterval::FULL]);
    }
    let st = positive_part(xst, es * ratio_bound - et);
    let ts = positive_part(xts, et * ratio_bound - es);
    let mut parts: Vec<RtsInterval> = st.into_iter().chain(ts).collect();
    parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut merged: Vec<RtsInterval> = Vec::new();
    for p in parts {
        match merged.last_mut() {
            Some(m) if p.lo <= m.hi => m.hi = m.hi.max(p.hi),
            _ => merged.push(p),
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::panel;
    use super::*;

    fn inputs_panel(w: [[f64; 2]; 2], h: [[f64; 2]; 2], c: [f64; 2]) -> HouseholdPanel {
        panel(
            [vec![w[0][0], w[1][0]], vec![w[0][1], w[1][1]]],
            [vec![h[0][0], h[1][0]], vec![h[0][1], h[1][1]]],
            [vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 1.0],
            c.to_vec(),
        )
    }

    #[test]
    fn identical_periods_give_full_interval() {
        let p = inputs_panel([[2.0, 4.0], [2.0, 4.0]], [[0.1, 0.2], [0.1, 0.2]], [5.0, 5.0]);
        assert_eq!(gapm_rts_upper_bound(&p, DEFAULT_GRID_STEP), Some(RtsInterval::FULL));
    }

    #[test]
    fn both_differences_negative_is_empty() {
        assert_eq!(pair_interval(-0.1, -0.2), None);
        assert_eq!(pair_interval(0.0, -0.2), None);
        assert_eq!(pair_interval(0.0, 0.0), Some(RtsInterval::FULL));
    }

    #[test]
    fn sweep_matches_closed_form_on_replicated_pair() {
        // Appending a copy of a period cannot loosen the bound.
        let two = inputs_panel([[2.0, 4.0], [2.0, 2.0]], [[0.15, 0.15], [0.05, 0.10]], [0.1, 0.2]);
        let r2 = gapm_rts_upper_bound(&two, DEFAULT_GRID_STEP).unwrap();
        let mut three = two.clone();
        for v in three
            .wage
            .iter_mut()
            .chain(three.childcare.iter_mut())
            .chain(three.leisure.iter_mut())
            .chain(three.work.iter_mut())
            .chain(three.private_exp.iter_mut())
        {
            let last = v[1];
            v.push(last);
        }
        three.public_exp.push(1.0);
        three.child_exp.push(0.2);
        let r3 = gapm_rts_upper_bound(&three, DEFAULT_GRID_STEP).unwrap();
        assert!((r3.hi - r2.hi).abs() < 1e-9, "{r3:?} vs {r2:?}");
    }

    #[test]
    fn ratio_bound_below_one_is_rejected() {
        let p = inputs_panel([[1.0, 1.0], [1.0, 1.0]], [[0.1, 0.1], [0.1, 0.1]], [1.0, 1.0]);
        assert!(matches!(garp_rts_bounds(&p, 0.9), Err(Error::InvalidRatioBound(_))));
    }

    #[test]
    fn identical_periods_admit_every_rts_under_garp() {
        let p = inputs_panel([[1.0, 1.0], [1.0, 1.0]], [[0.1, 0.1], [0.1, 0.1]], [1.0, 1.0]);
        assert_eq!(garp_rts_bounds(&p, 1.5).unwrap(), vec![RtsInterval::FULL]);
        assert_eq!(garp_rts_bounds(&p, 1.0).unwrap(), vec![RtsInterval::FULL]);
    }
}
