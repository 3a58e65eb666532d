use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::slice::{BlockBounds, Slice};
use super::{AcceptMode, SamplerConfig};
use crate::error::Result;
use crate::household::{garp_terms, HouseholdPanel, LatentState};

/// Which coordinates a move touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Lambda { member: usize, period: usize },
    /// Direction layout: `W (T), h*1 (T), h*2 (T)`; true leisure moves opposite to childcare.
    WelfareLeisure,
    /// Direction layout: `U1 (T), U2 (T), Pub1 (T), P1 (T), P2 (T)`; `Pub2 = 1 - Pub1`.
    UtilityPrices,
    /// Direction layout: `c* (T)`.
    ChildExp,
}

/// A scalar move `state + x * direction` with its feasible slice and the drawn step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMove {
    pub block: Block,
    pub direction: Vec<f64>,
    pub bounds: BlockBounds,
    pub step: f64,
}

impl BlockMove {
    pub fn apply(&self, state: &mut LatentState, x: f64) {
        apply(self.block, &self.direction, state, x);
    }
}

fn apply(block: Block, xi: &[f64], st: &mut LatentState, x: f64) {
    let n = st.periods();
    match block {
        Block::Lambda { member, period } => st.lambda[member][period] += x * xi[0],
        Block::WelfareLeisure => {
            for t in 0..n {
                st.welfare[t] += x * xi[t];
                for i in 0..2 {
                    let d = x * xi[(1 + i) * n + t];
                    st.true_childcare[i][t] += d;
                    st.true_leisure[i][t] -= d;
                }
            }
        }
        Block::UtilityPrices => {
            for t in 0..n {
                for i in 0..2 {
                    st.utility[i][t] += x * xi[i * n + t];
                    st.lindahl_welfare[i][t] += x * xi[(3 + i) * n + t];
                }
                st.lindahl_public[0][t] += x * xi[2 * n + t];
                st.lindahl_public[1][t] = 1.0 - st.lindahl_public[0][t];
            }
        }
        Block::ChildExp => {
            for t in 0..n {
                st.true_child_exp[t] += x * xi[t];
            }
        }
    }
}

/// Slacks of every linear constraint the blocks maintain; the state is
/// feasible for them when all entries are non-negative (positivity entries
/// must in fact be strictly positive). Order is fixed: per period the
/// multiplier range, positivity, implied child expenditure, decreasing
/// returns; then the utility inequalities.
pub fn constraint_slacks(panel: &HouseholdPanel, st: &LatentState, lambda_cap: f64) -> Vec<f64> {
    let n = panel.periods();
    let mut out = Vec::with_capacity(n * 16 + 2 * n * n);
    for t in 0..n {
        let pw = st.revenue(t);
        let labour = panel.wage[0][t] * st.true_childcare[0][t] + panel.wage[1][t] * st.true_childcare[1][t];
        for i in 0..2 {
            out.push(st.lambda[i][t] - 1.0);
            out.push(lambda_cap - st.lambda[i][t]);
            out.push(st.lindahl_public[i][t]);
            out.push(st.lindahl_welfare[i][t]);
            out.push(st.true_childcare[i][t]);
            out.push(st.true_leisure[i][t]);
        }
        out.push(st.welfare[t]);
        out.push(st.true_child_exp[t]);
        out.push(pw - labour);
        out.push(pw - labour - st.true_child_exp[t]);
    }
    for i in 0..2 {
        for t in 0..n {
            for s in 0..n {
                if s != t {
                    out.push(
                        st.lambda[i][t] * garp_terms(panel, st, i, s, t) - (st.utility[i][s] - st.utility[i][t]),
                    );
                }
            }
        }
    }
    out
}

/// Production inequalities `F_s - F_t <= delta_st / (P_t e^eps_t)` with no
/// tolerance; the state's elasticities and shocks must be current.
pub fn production_ok(panel: &HouseholdPanel, st: &LatentState) -> bool {
    let n = panel.periods();
    for t in 0..n {
        let scale = st.price(t) * st.shock[t].exp();
        if !(scale > 0.0 && scale.is_finite()) {
            return false;
        }
        for s in 0..n {
            if s == t {
                continue;
            }
            let delta = panel.wage[0][t] * (st.true_childcare[0][s] - st.true_childcare[0][t])
                + panel.wage[1][t] * (st.true_childcare[1][s] - st.true_childcare[1][t])
                + (st.true_child_exp[s] - st.true_child_exp[t]);
            if !(delta / scale - (st.production(s) - st.production(t)) >= 0.0) {
                return false;
            }
        }
    }
    true
}

fn draw_move<R: Rng + ?Sized>(
    panel: &HouseholdPanel,
    st: &mut LatentState,
    cfg: &SamplerConfig,
    rng: &mut R,
    block: Block,
    direction: Vec<f64>,
    name: &'static str,
) -> Result<BlockMove> {
    let base = constraint_slacks(panel, st, cfg.lambda_cap);
    let mut moved = st.clone();
    apply(block, &direction, &mut moved, 1.0);
    let unit = constraint_slacks(panel, &moved, cfg.lambda_cap);
    let mut slice = Slice::new();
    for (b, u) in base.iter().zip(&unit) {
        // slack(x) = b + x (u - b) >= 0
        slice.le(-(u - b), *b);
    }
    let step = if direction.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        slice.draw(rng, cfg.margin, name)?
    };
    apply(block, &direction, st, step);
    Ok(BlockMove {
        block,
        direction,
        bounds: slice.bounds(),
        step,
    })
}

fn normal_direction<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Redraws every multiplier `lambda^i_t` uniformly on its conditional slice
/// within `[1, L]`.
pub fn step1_lambda<R: Rng + ?Sized>(
    st: &mut LatentState,
    panel: &HouseholdPanel,
    rng: &mut R,
    cfg: &SamplerConfig,
) -> Result<Vec<BlockMove>> {
    let n = panel.periods();
    let mut moves = Vec::with_capacity(2 * n);
    for member in 0..2 {
        for period in 0..n {
            moves.push(draw_move(panel, st, cfg, rng, Block::Lambda { member, period }, vec![1.0], "lambda")?);
        }
    }
    Ok(moves)
}

/// Moves welfare and true childcare (with true leisure offsetting it) along
/// a random direction.
pub fn step2_welfare_leisure_childcare<R: Rng + ?Sized>(
    st: &mut LatentState,
    panel: &HouseholdPanel,
    rng: &mut R,
    cfg: &SamplerConfig,
) -> Result<BlockMove> {
    let xi = normal_direction(rng, 3 * panel.periods(), cfg.direction_scale);
    draw_move(panel, st, cfg, rng, Block::WelfareLeisure, xi, "welfare-leisure-childcare")
}

/// Moves utilities, Lindahl shares of the public good and personalised
/// welfare prices along a random direction. With a single period the
/// utilities are unconstrained and stay fixed.
pub fn step3_utilities_prices<R: Rng + ?Sized>(
    st: &mut LatentState,
    panel: &HouseholdPanel,
    rng: &mut R,
    cfg: &SamplerConfig,
) -> Result<BlockMove> {
    let n = panel.periods();
    let mut xi = normal_direction(rng, 5 * n, cfg.direction_scale);
    if n == 1 {
        xi[0] = 0.0;
        xi[1] = 0.0;
    }
    draw_move(panel, st, cfg, rng, Block::UtilityPrices, xi, "utilities-prices")
}

/// Moves true child expenditure along a random direction.
pub fn step4_child_expenditure<R: Rng + ?Sized>(
    st: &mut LatentState,
    panel: &HouseholdPanel,
    rng: &mut R,
    cfg: &SamplerConfig,
) -> Result<BlockMove> {
    let xi = normal_direction(rng, panel.periods(), cfg.direction_scale);
    draw_move(panel, st, cfg, rng, Block::ChildExp, xi, "child-expenditure")
}

/// Recomputes elasticities and shocks.
pub fn step5_deduce(st: &mut LatentState, panel: &HouseholdPanel) {
    st.deduce(panel);
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Accepts with probability `min(1, exp(old_sq - new_sq))`.
pub fn mh_accept_norms<R: Rng + ?Sized>(old_sq: f64, new_sq: f64, rng: &mut R) -> bool {
    let log_ratio = old_sq - new_sq;
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

/// Metropolis-Hastings decision for a target proportional to
/// `exp(-|measurement errors|^2)`.
pub fn mh_accept<R: Rng + ?Sized>(
    panel: &HouseholdPanel,
    old: &LatentState,
    proposed: &LatentState,
    rng: &mut R,
) -> bool {
    mh_accept_norms(
        sq_norm(&old.measurement_errors(panel)),
        sq_norm(&proposed.measurement_errors(panel)),
        rng,
    )
}

/// Accept/reject counts of one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassOutcome {
    pub decisions: u32,
    pub accepted: u32,
}

fn settle<R: Rng + ?Sized>(
    panel: &HouseholdPanel,
    st: &mut LatentState,
    old: LatentState,
    rng: &mut R,
    out: &mut PassOutcome,
) {
    st.deduce(panel);
    out.decisions += 1;
    if production_ok(panel, st) && mh_accept(panel, &old, st, rng) {
        out.accepted += 1;
    } else {
        *st = old;
    }
}

/// One complete pass of steps 1 to 5 with the configured acceptance granularity.
pub fn full_pass<R: Rng + ?Sized>(
    panel: &HouseholdPanel,
    st: &mut LatentState,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<PassOutcome> {
    let mut out = PassOutcome::default();
    match cfg.accept_mode {
        AcceptMode::PerPass => {
            let old = st.clone();
            step1_lambda(st, panel, rng, cfg)?;
            step2_welfare_leisure_childcare(st, panel, rng, cfg)?;
            step3_utilities_prices(st, panel, rng, cfg)?;
            step4_child_expenditure(st, panel, rng, cfg)?;
            settle(panel, st, old, rng, &mut out);
        }
        AcceptMode::PerBlock => {
            step1_lambda(st, panel, rng, cfg)?;
            let old = st.clone();
            step2_welfare_leisure_childcare(st, panel, rng, cfg)?;
            settle(panel, st, old, rng, &mut out);
            let old = st.clone();
            step3_utilities_prices(st, panel, rng, cfg)?;
            settle(panel, st, old, rng, &mut out);
            let old = st.clone();
            step4_child_expenditure(st, panel, rng, cfg)?;
            settle(panel, st, old, rng, &mut out);
        }
    }
    step5_deduce(st, panel);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::initialize;
    use super::*;
    use crate::household::fixtures::simple_panel;
    use crate::household::{afriat_check, CHECK_TOL};

    fn setup(t: usize) -> (HouseholdPanel, LatentState, SamplerConfig) {
        let p = simple_panel(t);
        let cfg = SamplerConfig::default();
        let st = initialize(&p, None, &cfg).unwrap();
        (p, st, cfg)
    }

    fn feasible(p: &HouseholdPanel, st: &LatentState, cap: f64) -> bool {
        constraint_slacks(p, st, cap).iter().all(|s| *s >= 0.0)
    }

    #[test]
    fn zero_direction_leaves_state_unchanged() {
        let (p, mut st, cfg) = setup(3);
        let before = st.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for block in [Block::WelfareLeisure, Block::UtilityPrices, Block::ChildExp] {
            let len = match block {
                Block::WelfareLeisure => 9,
                Block::UtilityPrices => 15,
                _ => 3,
            };
            let m = draw_move(&p, &mut st, &cfg, &mut rng, block, vec![0.0; len], "zero").unwrap();
            assert_eq!(m.step, 0.0);
        }
        assert_eq!(st, before);
    }

    #[test]
    fn single_period_lambda_slice_is_full_support() {
        let (p, mut st, cfg) = setup(1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lambda0 = st.lambda[0][0];
        let moves = step1_lambda(&mut st, &p, &mut rng, &cfg).unwrap();
        let b = moves[0].bounds;
        assert!((lambda0 + b.lower - 1.0).abs() < 1e-12);
        assert!((lambda0 + b.upper - cfg.lambda_cap).abs() < 1e-9);
    }

    #[test]
    fn lindahl_shares_sum_to_one() {
        let (p, mut st, cfg) = setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            step3_utilities_prices(&mut st, &p, &mut rng, &cfg).unwrap();
            for t in 0..3 {
                assert!((st.lindahl_public[0][t] + st.lindahl_public[1][t] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn blocks_preserve_feasibility() {
        let (p, mut st, cfg) = setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            step1_lambda(&mut st, &p, &mut rng, &cfg).unwrap().iter().for_each(|m| assert!(m.bounds.contains_zero()));
            assert!(step2_welfare_leisure_childcare(&mut st, &p, &mut rng, &cfg).unwrap().bounds.contains_zero());
            assert!(step3_utilities_prices(&mut st, &p, &mut rng, &cfg).unwrap().bounds.contains_zero());
            assert!(step4_child_expenditure(&mut st, &p, &mut rng, &cfg).unwrap().bounds.contains_zero());
            step5_deduce(&mut st, &p);
            assert!(feasible(&p, &st, cfg.lambda_cap));
            for t in 0..3 {
                let sum: f64 = st.elasticity.iter().map(|a| a[t]).sum();
                assert!(sum <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn endpoints_are_tight() {
        let (p, mut st, cfg) = setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let before = st.clone();
            let mut moves = step1_lambda(&mut st, &p, &mut rng, &cfg).unwrap();
            moves.push(step2_welfare_leisure_childcare(&mut st, &p, &mut rng, &cfg).unwrap());
            moves.push(step3_utilities_prices(&mut st, &p, &mut rng, &cfg).unwrap());
            moves.push(step4_child_expenditure(&mut st, &p, &mut rng, &cfg).unwrap());
            let mut replay = before;
            for m in &moves {
                let w = m.bounds.upper - m.bounds.lower;
                for (edge, sign) in [(m.bounds.lower, -1.0), (m.bounds.upper, 1.0)] {
                    let probe = |x: f64| {
                        let mut s = replay.clone();
                        m.apply(&mut s, x);
                        feasible(&p, &s, cfg.lambda_cap)
                    };
                    assert!(probe(edge - sign * 1e-6 * w), "{:?} inside", m.block);
                    assert!(!probe(edge + sign * 1e-6 * w), "{:?} outside", m.block);
                }
                m.apply(&mut replay, m.step);
            }
            step5_deduce(&mut st, &p);
        }
    }

    #[test]
    fn passes_keep_afriat_system() {
        for mode in [AcceptMode::PerPass, AcceptMode::PerBlock] {
            let (p, mut st, mut cfg) = setup(3);
            cfg.accept_mode = mode;
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            for _ in 0..1000 {
                full_pass(&p, &mut st, &cfg, &mut rng).unwrap();
                assert!(afriat_check(&p, &st, CHECK_TOL).unwrap().feasible);
            }
        }
    }

    #[test]
    fn mh_accepts_one_quarter_when_norm_grows_by_log_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| mh_accept_norms(1.3, 1.3 + 4f64.ln(), &mut rng))
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.25).abs() < 0.01, "{freq}");
    }

    #[test]
    fn mh_always_accepts_equal_or_zero_error() {
        let (p, st, _) = setup(2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut noisy = st.clone();
        noisy.true_child_exp[0] *= 0.5;
        for _ in 0..1000 {
            assert!(mh_accept(&p, &st, &st, &mut rng));
            assert!(mh_accept(&p, &noisy, &st, &mut rng));
        }
    }
}
