use serde::{Deserialize, Serialize};

use super::{HouseholdPanel, LatentState};
use crate::error::{Error, Result};

/// One violated inequality of the Afriat system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Member `member` (0-based), comparison of bundle `s` at prices of `t`.
    Utility { member: usize, s: usize, t: usize, slack: f64 },
    Production { s: usize, t: usize, slack: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfriatReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Utility-side cost difference
/// `w^i_t (l_s - l_t) + (q_s - q_t) + Pub^i_t (Q_s - Q_t) + P^i_t (W_s - W_t)`
/// evaluated at the state's true leisure.
pub fn garp_terms(panel: &HouseholdPanel, state: &LatentState, i: usize, s: usize, t: usize) -> f64 {
    panel.wage[i][t] * (state.true_leisure[i][s] - state.true_leisure[i][t])
        + (panel.private_exp[i][s] - panel.private_exp[i][t])
        + state.lindahl_public[i][t] * (panel.public_exp[s] - panel.public_exp[t])
        + state.lindahl_welfare[i][t] * (state.welfare[s] - state.welfare[t])
}

fn check_state_positive(state: &LatentState) -> Result<()> {
    let t = state.periods();
    for s in 0..t {
        let fields: [(&'static str, f64); 8] = [
            ("welfare", state.welfare[s]),
            ("true_child_exp", state.true_child_exp[s]),
            ("true_childcare", state.true_childcare[0][s].min(state.true_childcare[1][s])),
            ("true_leisure", state.true_leisure[0][s].min(state.true_leisure[1][s])),
            ("lindahl_welfare", state.lindahl_welfare[0][s].min(state.lindahl_welfare[1][s])),
            ("lindahl_public", state.lindahl_public[0][s].min(state.lindahl_public[1][s])),
            ("lambda", state.lambda[0][s].min(state.lambda[1][s])),
            ("price", state.price(s)),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositive { field: name, period: s });
            }
        }
    }
    Ok(())
}

/// Verifies every utility and production inequality of the Afriat system.
pub fn afriat_check(panel: &HouseholdPanel, state: &LatentState, tol: f64) -> Result<AfriatReport> {
    state.check_dimensions(panel)?;
    check_state_positive(state)?;
    let n = panel.periods();
    let mut violations = Vec::new();
    for i in 0..2 {
        for t in 0..n {
            for s in 0..n {
                if s == t {
                    continue;
                }
                let slack = state.lambda[i][t] * garp_terms(panel, state, i, s, t)
                    - (state.utility[i][s] - state.utility[i][t]);
                if slack < -tol {
                    violations.push(Violation::Utility { member: i, s, t, slack });
                }
            }
        }
    }
    for t in 0..n {
        let scale = state.price(t) * state.shock[t].exp();
        for s in 0..n {
            if s == t {
                continue;
            }
            let delta = panel.wage[0][t] * (state.true_childcare[0][s] - state.true_childcare[0][t])
                + panel.wage[1][t] * (state.true_childcare[1][s] - state.true_childcare[1][t])
                + (state.true_child_exp[s] - state.true_child_exp[t]);
            let slack = delta / scale - (state.production(s) - state.production(t));
            if slack < -tol {
                violations.push(Violation::Production { s, t, slack });
            }
        }
    }
    Ok(AfriatReport {
        feasible: violations.is_empty(),
        violations,
    })
}

/// Direct relation between two periods for one member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    None,
    Weak,
    Strict,
}

/// Direct revealed-preference relation and its reflexive-transitive closure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedPreferenceRelation {
    /// `a[i][s][t]`.
    pub a: [Vec<Vec<f64>>; 2],
    pub direct: [Vec<Vec<Relation>>; 2],
    pub closure: [Vec<Vec<bool>>; 2],
}

impl RevealedPreferenceRelation {
    pub fn build(panel: &HouseholdPanel, state: &LatentState) -> Result<Self> {
        state.check_dimensions(panel)?;
        let n = panel.periods();
        let mk = |i: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|s| (0..n).map(|t| if s == t { 0.0 } else { garp_terms(panel, state, i, s, t) }).collect())
                .collect()
        };
        let a = [mk(0), mk(1)];
        let direct = [0, 1].map(|i| {
            a[i].iter()
                .map(|row| {
                    row.iter()
                        .map(|&v| {
                            if v < 0.0 {
                                Relation::Strict
                            } else if v <= 0.0 {
                                Relation::Weak
                            } else {
                                Relation::None
                            }
                        })
                        .collect()
                })
                .collect::<Vec<Vec<Relation>>>()
        });
        let closure = [0, 1].map(|i| {
            let mut c: Vec<Vec<bool>> = (0..n)
                .map(|s| (0..n).map(|t| s == t || direct[i][s][t] != Relation::None).collect())
                .collect();
            for k in 0..n {
                for s in 0..n {
                    if c[s][k] {
                        for t in 0..n {
                            if c[k][t] {
                                c[s][t] = true;
                            }
                        }
                    }
                }
            }
            c
        });
        Ok(Self { a, direct, closure })
    }

    /// Shortest chain of weak links from `s` to `t` for member `i`.
    fn path(&self, i: usize, s: usize, t: usize) -> Vec<usize> {
        let n = self.a[i].len();
        let mut prev = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([s]);
        prev[s] = s;
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for v in 0..n {
                if prev[v] == usize::MAX && self.direct[i][u][v] != Relation::None {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        let mut path = vec![t];
        let mut cur = t;
        while cur != s {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// A GARP violation: `path` is a chain of weakly related periods from its
/// first to its last element, and the closing comparison back to the first
/// element is strict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarpCycle {
    pub member: usize,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarpReport {
    pub passes: bool,
    pub cycle: Option<GarpCycle>,
}

/// Tests GARP for both members at the state's prices and true leisure.
pub fn garp_check(panel: &HouseholdPanel, state: &LatentState) -> Result<GarpReport> {
    let rel = RevealedPreferenceRelation::build(panel, state)?;
    let n = panel.periods();
    for i in 0..2 {
        for s in 0..n {
            for t in 0..n {
                if s != t && rel.closure[i][s][t] && rel.a[i][t][s] < 0.0 {
                    return Ok(GarpReport {
                        passes: false,
                        cycle: Some(GarpCycle {
                            member: i,
                            path: rel.path(i, s, t),
                        }),
                    });
                }
            }
        }
    }
    Ok(GarpReport {
        passes: true,
        cycle: None,
    })
}

/// Generalized axiom of profit maximisation on the panel's observed inputs.
pub fn gapm_check(panel: &HouseholdPanel, price: &[f64], prod: &[f64], eps: &[f64]) -> Result<bool> {
    let n = panel.periods();
    if price.len() != n || prod.len() != n || eps.len() != n {
        return Err(Error::Dimension(format!("gapm inputs must have {n} periods")));
    }
    for t in 0..n {
        if !(price[t] > 0.0) {
            return Err(Error::NonPositive { field: "price", period: t });
        }
        if !(prod[t] > 0.0) {
            return Err(Error::NonPositive { field: "production", period: t });
        }
    }
    let cost = |t: usize, s: usize| {
        panel.wage[0][t] * panel.childcare[0][s] + panel.wage[1][t] * panel.childcare[1][s] + panel.child_exp[s]
    };
    for t in 0..n {
        let m = price[t] * eps[t].exp();
        let own = m * prod[t] - cost(t, t);
        for s in 0..n {
            let other = m * prod[s] - cost(t, s);
            if own < other - super::CHECK_TOL * own.abs().max(other.abs()).max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn single_period_is_always_consistent() {
        let p = simple_panel(1);
        let st = state_for(&p, &[1.0], &[10.0]);
        assert!(afriat_check(&p, &st, 0.0).unwrap().feasible);
        assert!(garp_check(&p, &st).unwrap().passes);
    }

    /// Member 1 finds each bundle strictly cheaper at the other period's prices.
    fn two_cycle_panel() -> (HouseholdPanel, LatentState) {
        let mut p = simple_panel(2);
        p.wage[0] = vec![100.0, 100.0];
        p.private_exp = [vec![50.0, 10.0], vec![30.0, 30.0]];
        p.public_exp = vec![100.0, 100.0];
        let mut st = state_for(&p, &[1.0, 1.0], &[20.0, 10.0]);
        st.true_leisure[0] = vec![0.1, 0.6];
        st.lindahl_welfare[0] = vec![2.0, 0.5];
        // a_12 = 100 (0.1 - 0.6) + 40 + 0.5 (20 - 10) = -5
        // a_21 = 100 (0.6 - 0.1) - 40 + 2 (10 - 20) = -10
        (p, st)
    }

    #[test]
    fn detects_two_cycle_for_member_one() {
        let (p, st) = two_cycle_panel();
        let rel = RevealedPreferenceRelation::build(&p, &st).unwrap();
        assert!(rel.a[0][0][1] < 0.0 && rel.a[0][1][0] < 0.0);
        let r = garp_check(&p, &st).unwrap();
        assert!(!r.passes);
        let c = r.cycle.unwrap();
        assert_eq!(c.member, 0);
        let mut sorted = c.path.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1]);
    }

    #[test]
    fn gapm_constant_inputs_pass() {
        let mut p = simple_panel(3);
        for i in 0..2 {
            p.wage[i] = vec![10.0; 3];
            p.childcare[i] = vec![0.2; 3];
        }
        p.child_exp = vec![5.0; 3];
        assert!(gapm_check(&p, &[1.0, 2.0, 3.0], &[4.0; 3], &[0.1, -0.2, 0.0]).unwrap());
    }

    #[test]
    fn gapm_rejects_nonpositive_price() {
        let p = simple_panel(2);
        assert!(gapm_check(&p, &[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn afriat_rejects_dimension_mismatch() {
        let p = simple_panel(3);
        let st = state_for(&simple_panel(2), &[1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(afriat_check(&p, &st, 0.0), Err(Error::Dimension(_))));
    }
}
