use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Primitives of one household in model units. Member utility is
/// `a_l log l + a_q log q + a_Q log Q + a_W u(W)` with isoelastic
/// `u(W) = (W^(1-sigma) - 1) / (1 - sigma)` (`log W` at `sigma = 1`); welfare
/// is produced as `W = e^eps h1^alpha1 h2^alpha2 c^alpha3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdParams {
    /// `weights[i] = [a_l, a_q, a_Q, a_W]`.
    pub weights: [[f64; 4]; 2],
    pub alpha: [f64; 3],
    /// Member-1 Pareto weight per period; member 2 gets the complement.
    pub pareto: Vec<f64>,
    pub wage: [Vec<f64>; 2],
    pub nonlabor_income: Vec<f64>,
    pub shock: Vec<f64>,
    /// Curvature `sigma` of welfare utility.
    #[serde(default = "unit_curvature")]
    pub curvature: f64,
}

fn unit_curvature() -> f64 {
    1.0
}

/// Isoelastic utility of welfare.
pub fn welfare_utility(w: f64, sigma: f64) -> f64 {
    if (sigma - 1.0).abs() < 1e-12 {
        w.ln()
    } else {
        (w.powf(1.0 - sigma) - 1.0) / (1.0 - sigma)
    }
}

impl HouseholdParams {
    pub fn periods(&self) -> usize {
        self.shock.len()
    }

    pub fn rts(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Optimal allocation of one period together with its shadow prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSolution {
    pub leisure: [f64; 2],
    pub childcare: [f64; 2],
    pub work: [f64; 2],
    pub private_exp: [f64; 2],
    pub public_exp: f64,
    pub child_exp: f64,
    pub price: f64,
    pub welfare: f64,
    pub lindahl_public: [f64; 2],
    pub lindahl_welfare: [f64; 2],
    /// Marginal utility of money in the weighted household problem.
    pub eta: f64,
    /// Unscaled member utilities and multipliers `eta / mu^i`.
    pub utility: [f64; 2],
    pub lambda: [f64; 2],
}

/// Log of the revenue `P W(P)` when inputs are chosen optimally at price `P`.
fn log_revenue(p: &HouseholdParams, t: usize, log_price: f64) -> f64 {
    let r = p.rts();
    let prices = [p.wage[0][t], p.wage[1][t], 1.0];
    let mut log_w = p.shock[t];
    for k in 0..3 {
        log_w += p.alpha[k] * (p.alpha[k].ln() + log_price - prices[k].ln());
    }
    log_price + log_w / (1.0 - r)
}

/// Solves period `t` from the first-order conditions.
///
/// Full income `y + w1 + w2` is spent on leisure, private and public goods
/// and input costs; the marginal utility of money follows from the budget,
/// and the welfare price solves `P W(P) = A_W / eta` by bisection in `log P`.
/// Returns [`Error::Numeric`] for a corner (no time left for work).
pub fn solve_period(p: &HouseholdParams, t: usize) -> Result<PeriodSolution> {
    let r = p.rts();
    if !(r > 0.0 && r < 1.0) || p.alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidRts(r));
    }
    let mu = [p.pareto[t], 1.0 - p.pareto[t]];
    let w = [p.wage[0][t], p.wage[1][t]];
    let full = p.nonlabor_income[t] + w[0] + w[1];
    let a_q_pub: f64 = (0..2).map(|i| mu[i] * p.weights[i][2]).sum();
    let a_w: f64 = (0..2).map(|i| mu[i] * p.weights[i][3]).sum();
    let s: f64 = (0..2).map(|i| mu[i] * (p.weights[i][0] + p.weights[i][1])).sum::<f64>() + a_q_pub + r * a_w;
    if !(full > 0.0) {
        return Err(Error::Numeric("non-positive full income".into()));
    }
    let sigma = p.curvature;
    let other = s - r * a_w;
    // log of total spending at welfare price `e^x`, with eta from the welfare condition
    let log_spend = |x: f64| {
        let log_rev = log_revenue(p, t, x);
        let log_inv_eta = x + sigma * (log_rev - x) - a_w.ln();
        let (a, b) = (other.ln() + log_inv_eta, r.ln() + log_rev);
        a.max(b) + (-(a - b).abs()).exp().ln_1p()
    };
    let target = full.ln();
    let (mut lo, mut hi) = (-80.0f64, 80.0f64);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if log_spend(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let log_price = 0.5 * (lo + hi);
    let residual = log_spend(log_price) - target;
    if residual.abs() > 1e-10 {
        return Err(Error::Numeric(format!("welfare price residual {residual}")));
    }
    let revenue = log_revenue(p, t, log_price).exp();
    let price = log_price.exp();
    let welfare = revenue / price;
    let eta = a_w * welfare.powf(-sigma) / price;
    let leisure = [0, 1].map(|i| mu[i] * p.weights[i][0] / (eta * w[i]));
    let private_exp = [0, 1].map(|i| mu[i] * p.weights[i][1] / eta);
    let public_exp = a_q_pub / eta;
    let childcare = [0, 1].map(|i| p.alpha[i] * revenue / w[i]);
    let child_exp = p.alpha[2] * revenue;
    let work = [0, 1].map(|i| 1.0 - leisure[i] - childcare[i]);
    if work.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Numeric("corner: no time left for work".into()));
    }
    let utility = [0, 1].map(|i| {
        let a = p.weights[i];
        a[0] * leisure[i].ln() + a[1] * private_exp[i].ln() + a[2] * public_exp.ln() + a[3] * welfare_utility(welfare, sigma)
    });
    Ok(PeriodSolution {
        leisure,
        childcare,
        work,
        private_exp,
        public_exp,
        child_exp,
        price,
        welfare,
        lindahl_public: [0, 1].map(|i| mu[i] * p.weights[i][2] / a_q_pub),
        lindahl_welfare: [0, 1].map(|i| mu[i] * p.weights[i][3] * welfare.powf(-sigma) / eta),
        eta,
        utility,
        lambda: [0, 1].map(|i| eta / mu[i]),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn symmetric(t: usize) -> HouseholdParams {
        HouseholdParams {
            weights: [[3.0, 0.4, 1.0, 2.9]; 2],
            alpha: [0.1, 0.14, 0.09],
            pareto: vec![0.5; t],
            wage: [vec![6.5; t], vec![6.5; t]],
            nonlabor_income: vec![0.2; t],
            shock: vec![0.0; t],
            curvature: 1.0,
        }
    }

    #[test]
    fn symmetric_members_get_identical_bundles() {
        let mut p = symmetric(1);
        p.alpha = [0.12, 0.12, 0.09];
        let s = solve_period(&p, 0).unwrap();
        assert!((s.leisure[0] - s.leisure[1]).abs() < 1e-15);
        assert!((s.private_exp[0] - s.private_exp[1]).abs() < 1e-15);
    }

    #[test]
    fn budget_and_profit_conditions_hold() {
        let p = symmetric(1);
        let s = solve_period(&p, 0).unwrap();
        let w = [p.wage[0][0], p.wage[1][0]];
        let spend = s.private_exp[0] + s.private_exp[1] + s.public_exp + s.child_exp;
        let earn = p.nonlabor_income[0] + w[0] * s.work[0] + w[1] * s.work[1];
        assert!((spend - earn).abs() < 1e-9);
        let cost = w[0] * s.childcare[0] + w[1] * s.childcare[1] + s.child_exp;
        assert!((cost - p.rts() * s.price * s.welfare).abs() < 1e-10 * cost);
        let f = s.childcare[0].powf(0.1) * s.childcare[1].powf(0.14) * s.child_exp.powf(0.09);
        assert!((f - s.welfare).abs() < 1e-9 * f);
        assert!((s.lindahl_welfare[0] + s.lindahl_welfare[1] - s.price).abs() < 1e-12 * s.price);
    }

    #[test]
    fn curved_welfare_keeps_first_order_conditions() {
        let mut p = symmetric(1);
        p.curvature = 2.5;
        p.shock[0] = 0.4;
        let s = solve_period(&p, 0).unwrap();
        let w = [p.wage[0][0], p.wage[1][0]];
        let spend = s.private_exp[0] + s.private_exp[1] + s.public_exp + s.child_exp;
        let earn = p.nonlabor_income[0] + w[0] * s.work[0] + w[1] * s.work[1];
        assert!((spend - earn).abs() < 1e-9);
        let cost = w[0] * s.childcare[0] + w[1] * s.childcare[1] + s.child_exp;
        assert!((cost - p.rts() * s.price * s.welfare).abs() < 1e-10 * cost);
        let mwtp: f64 = (0..2).map(|i| 0.5 * p.weights[i][3] * s.welfare.powf(-2.5)).sum::<f64>() / s.eta;
        assert!((mwtp - s.price).abs() < 1e-10 * s.price);
        let mut q = p.clone();
        q.shock[0] = 0.0;
        assert!(solve_period(&q, 0).unwrap().child_exp != s.child_exp);
    }

    #[test]
    fn higher_pareto_weight_raises_private_spending() {
        let p = symmetric(1);
        let base = solve_period(&p, 0).unwrap();
        let mut q = p.clone();
        q.pareto[0] = 0.6;
        assert!(solve_period(&q, 0).unwrap().private_exp[0] > base.private_exp[0]);
    }

    #[test]
    fn corner_is_reported() {
        let mut p = symmetric(1);
        p.weights[0][0] = 300.0;
        assert!(solve_period(&p, 0).is_err());
    }
}
