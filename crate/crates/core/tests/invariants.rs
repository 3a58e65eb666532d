use proptest::prelude::*;

use collective::elvis::{averaged_moment, chi2_quantile, population_variance};
use collective::household::{
    construct_rationalizing_prices, garp_check, gapm_rts_upper_bound, time_invariance_residual, HouseholdPanel,
    DEFAULT_GRID_STEP,
};
use collective::sampler::{initialize, project_time_invariant, run_chain, SamplerConfig};

fn panel_strategy(max_t: usize) -> impl Strategy<Value = HouseholdPanel> {
    (2..=max_t).prop_flat_map(|n| {
        let v = move |lo: f64, hi: f64| prop::collection::vec(lo..hi, n);
        (
            (v(5.0, 40.0), v(5.0, 40.0)),
            (v(0.01, 0.2), v(0.01, 0.2)),
            (v(0.1, 0.5), v(0.1, 0.5)),
            (v(50.0, 800.0), v(50.0, 800.0)),
            v(100.0, 2000.0),
            v(5.0, 400.0),
        )
            .prop_map(|(w, h, b, q, pubx, c)| {
                let wage = [w.0, w.1];
                let childcare = [h.0, h.1];
                let work = [b.0, b.1];
                let leisure = [0, 1].map(|i| (0..childcare[i].len()).map(|t| 1.0 - childcare[i][t] - work[i][t]).collect());
                HouseholdPanel {
                    id: "p".into(),
                    wage,
                    leisure,
                    childcare,
                    work,
                    private_exp: [q.0, q.1],
                    public_exp: pubx,
                    child_exp: c,
                    covariates: Vec::new(),
                }
            })
    })
}

fn scale_money(p: &HouseholdPanel, k: f64) -> HouseholdPanel {
    let mut q = p.clone();
    for i in 0..2 {
        q.wage[i].iter_mut().for_each(|w| *w *= k);
        q.private_exp[i].iter_mut().for_each(|x| *x *= k);
    }
    q.public_exp.iter_mut().for_each(|x| *x *= k);
    q.child_exp.iter_mut().for_each(|x| *x *= k);
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructed_prices_satisfy_garp_and_returns_to_scale(p in panel_strategy(6), r in 0.05f64..1.0) {
        let st = construct_rationalizing_prices(&p, r).unwrap().state(&p);
        prop_assert!(garp_check(&p, &st).unwrap().passes);
        for t in 0..p.periods() {
            let sum: f64 = st.elasticity.iter().map(|a| a[t]).sum();
            prop_assert!((sum - r).abs() < 1e-9);
            prop_assert!((st.expenditure(&p, t) - r * st.revenue(t)).abs() < 1e-9 * st.expenditure(&p, t));
        }
    }

    #[test]
    fn garp_is_invariant_to_the_money_unit(p in panel_strategy(5), r in 0.05f64..1.0, k in 0.01f64..100.0) {
        let st = construct_rationalizing_prices(&p, r).unwrap().state(&p);
        let q = scale_money(&p, k);
        let mut sq = st.clone();
        sq.welfare.iter_mut().for_each(|w| *w *= k);
        prop_assert_eq!(garp_check(&p, &st).unwrap().passes, garp_check(&q, &sq).unwrap().passes);
    }

    #[test]
    fn profit_bound_is_invariant_to_the_money_unit(p in panel_strategy(2), k in 0.01f64..100.0) {
        let a = gapm_rts_upper_bound(&p, DEFAULT_GRID_STEP);
        let b = gapm_rts_upper_bound(&scale_money(&p, k), DEFAULT_GRID_STEP);
        match (a, b) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                prop_assert!((a.hi - b.hi).abs() < 1e-9);
                prop_assert_eq!(a.lo, 0.0);
            }
            _ => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn more_periods_only_tighten_the_profit_bound(p in panel_strategy(4)) {
        let mut sub = p.clone();
        for i in 0..2 {
            for v in [&mut sub.wage[i], &mut sub.leisure[i], &mut sub.childcare[i], &mut sub.work[i], &mut sub.private_exp[i]] {
                v.truncate(2);
            }
        }
        sub.public_exp.truncate(2);
        sub.child_exp.truncate(2);
        if let Some(full) = gapm_rts_upper_bound(&p, DEFAULT_GRID_STEP) {
            let part = gapm_rts_upper_bound(&sub, DEFAULT_GRID_STEP);
            prop_assert!(part.is_some_and(|b| b.hi >= full.hi - 1e-9));
        }
    }

    #[test]
    fn residual_ignores_per_input_and_common_scaling(
        p in panel_strategy(5),
        a in prop::array::uniform3(0.2f64..5.0),
    ) {
        let base = time_invariance_residual(&p).unwrap();
        let mut q = p.clone();
        for i in 0..2 {
            q.wage[i].iter_mut().for_each(|w| *w *= a[i]);
        }
        q.child_exp.iter_mut().for_each(|c| *c *= a[2]);
        prop_assert!((time_invariance_residual(&q).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn tilt_commutes_with_translation(
        rows in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 2..40),
        gamma in prop::array::uniform3(-2.0f64..2.0),
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let draws: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| (0..3).map(|k| r[k] + shift[k]).collect()).collect();
        let a = averaged_moment(&draws, &gamma).unwrap();
        let b = averaged_moment(&moved, &gamma).unwrap();
        for k in 0..3 {
            prop_assert!((b[k] - a[k] - shift[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn tilted_mean_stays_in_the_hull(
        rows in prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), 1..30),
        gamma in prop::array::uniform2(-50.0f64..50.0),
    ) {
        let draws: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let m = averaged_moment(&draws, &gamma).unwrap();
        for k in 0..2 {
            let lo = rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m[k] >= lo - 1e-12 && m[k] <= hi + 1e-12);
        }
    }

    #[test]
    fn variance_is_nonnegative_and_shift_invariant(v in prop::collection::vec(-10.0f64..10.0, 1..8), c in -100.0f64..100.0) {
        let a = population_variance(&v);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert!(a >= 0.0);
        prop_assert!((population_variance(&shifted) - a).abs() < 1e-9 * (1.0 + a));
    }

    #[test]
    fn chi2_quantile_increases_with_level_and_df(df in 1usize..40, a in 0.5f64..0.98) {
        let q = chi2_quantile(df, a).unwrap();
        prop_assert!(chi2_quantile(df, a + 0.01).unwrap() > q);
        prop_assert!(chi2_quantile(df + 1, a).unwrap() > q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn retained_draws_are_feasible_and_reproducible(p in panel_strategy(4), seed in 0u64..1000) {
        let cfg = SamplerConfig { burn_in: 100, post_burn_draws: 200, thinning_keep_fraction: 0.1, rng_seed: seed, ..Default::default() };
        if let Ok(a) = run_chain(&p, &cfg) {
            for st in &a.states {
                prop_assert!(collective::household::afriat_check(&p, st, 1e-9).unwrap().feasible);
            }
            prop_assert_eq!(a, run_chain(&p, &cfg).unwrap());
        }
    }

    #[test]
    fn projection_preserves_totals(p in panel_strategy(4), r in 0.05f64..1.0) {
        let cfg = SamplerConfig::default();
        if let Ok(st) = initialize(&p, None, &cfg) {
            if let Some(q) = project_time_invariant(&p, &st, r, cfg.lambda_cap) {
                prop_assert!((q.rts() - r).abs() < 1e-12);
                for t in 0..p.periods() {
                    prop_assert!((q.expenditure(&p, t) - st.expenditure(&p, t)).abs() < 1e-9 * st.expenditure(&p, t));
                    prop_assert!((q.expenditure(&p, t) - r * q.revenue(t)).abs() < 1e-9 * q.expenditure(&p, t));
                }
            }
        }
    }
}
