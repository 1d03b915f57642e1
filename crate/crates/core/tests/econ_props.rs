//! Invariants of the cost model over random parameters.

use proptest::prelude::*;

use pat_core::econ::{
    asymptotic_cost, asymptotic_savings, asymptotic_threshold, expected_cost_heterogeneous, expected_cost_homogeneous,
    fit_scaling_law, generator_objective, optimal_generator_cost, savings_margin, tree_cost, EconScenario, ModelEcon,
    Split,
};

fn constructed() -> impl Strategy<Value = EconScenario> {
    (1.0..100.0f64, 0.1..10.0f64, 2u32..=12, 0.01..1.0f64, 0.0..1.0f64).prop_map(|(p_l, c_l, n, beta, d_frac)| {
        EconScenario::constructed(p_l, c_l, n, d_frac * p_l * c_l / 2.0, beta).unwrap()
    })
}

fn ordered_pair() -> impl Strategy<Value = EconScenario> {
    (1.0..100.0f64, 0.1..10.0f64, 0.05..0.95f64, 0.01..0.99f64, 2u32..=8, 0.0..20.0f64).prop_map(
        |(p_l, c_l, p_frac, c_frac, n, d)| {
            let large = ModelEcon::new(p_l, c_l).unwrap();
            let small = ModelEcon::new(p_l * p_frac, c_l * c_frac).unwrap();
            EconScenario::new(large, small, n, d, 1.0, 1.0).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn margin_sign_matches_cost_comparison(s in constructed()) {
        let margin = savings_margin(&s);
        let hetero = expected_cost_heterogeneous(&s).unwrap();
        let homo = expected_cost_homogeneous(&s);
        // both sides are rounded; stay clear of the exact boundary
        prop_assume!(margin.margin.abs() > 1e-9 * margin.bound.abs().max(1.0));
        prop_assert_eq!(margin.holds, hetero < homo, "{:?} {} {}", margin, hetero, homo);
        // the margin is the cost gap rescaled by (p_L − p_s)/p_L
        let scale = (s.large.p - s.small.p) / s.large.p;
        prop_assert!(((homo - hetero) - scale * margin.margin).abs() <= 1e-9 * homo.max(1.0));
    }

    #[test]
    fn asymptotic_condition_matches_cheaper_cost(s in ordered_pair(), k_mult in 10.0..1e6f64) {
        let k = k_mult * s.large.p;
        let threshold = asymptotic_threshold(&s).unwrap();
        prop_assume!((s.d - threshold).abs() > 1e-9 * threshold.abs().max(1.0));
        let small = asymptotic_cost(k, &s.small, s.n, s.d);
        let large = asymptotic_cost(k, &s.large, s.n, s.d);
        prop_assert_eq!(asymptotic_savings(&s).unwrap(), small < large);
    }

    #[test]
    fn tree_expansion_approaches_closed_form(
        p in 1.0..50.0f64,
        c in 0.1..5.0f64,
        n in 2u32..=6,
        d in 0.0..10.0f64,
    ) {
        let m = ModelEcon::new(p, c).unwrap();
        let k = 1e4 * p;
        let closed = asymptotic_cost(k, &m, n, d);
        let tree = tree_cost(k, &m, n, d, Split::Peel);
        prop_assert!((closed - tree).abs() / tree < 0.01, "closed {} tree {}", closed, tree);
        // never cheaper than solving everything at unit cost
        prop_assert!(tree >= k * c * (1.0 - 1e-12));
    }

    #[test]
    fn exact_scaling_law_is_recovered(
        alpha in 0.1..100.0f64,
        beta in 0.05..1.0f64,
        costs in proptest::collection::btree_set(1u32..100_000, 2..12),
    ) {
        let points: Vec<(f64, f64)> =
            costs.iter().map(|&c| f64::from(c) / 100.0).map(|c| (c, alpha * c.powf(beta))).collect();
        let fit = fit_scaling_law(&points).unwrap();
        prop_assert!((fit.alpha - alpha).abs() / alpha < 1e-8, "{:?}", fit);
        prop_assert!((fit.beta - beta).abs() < 1e-9, "{:?}", fit);
        prop_assert!(fit.residual < 1e-8);
    }

    #[test]
    fn optimum_is_a_minimum(
        alpha in 0.1..100.0f64,
        beta in 0.05..1.0f64,
        d in 0.01..100.0f64,
        c_l in 0.01..100.0f64,
        step in 1e-3..0.5f64,
    ) {
        let c = optimal_generator_cost(alpha, beta, d, c_l).unwrap();
        let at = generator_objective(c, alpha, beta, d);
        prop_assert!(c > 0.0 && c <= c_l);
        let tol = 1e-12 * at;
        prop_assert!(generator_objective(c * (1.0 - step), alpha, beta, d) >= at - tol);
        if c < c_l {
            prop_assert!(generator_objective(c * (1.0 + step), alpha, beta, d) >= at - tol);
        }
    }
}
