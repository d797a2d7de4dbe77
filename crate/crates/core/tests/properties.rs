use merton_equilibrium::closedform;
use merton_equilibrium::model;
use merton_equilibrium::policy::Policy;
use merton_equilibrium::quadrature::GaussLegendre;
use merton_equilibrium::{equilibrium, grid};
use merton_equilibrium::{Curve, DiscountFunction, EquilibriumPolicy, MarketModel, TimeGrid, Utility};
use proptest::prelude::*;

fn market(r0: f64, mu: f64, sigma: f64) -> MarketModel {
    MarketModel::constant(TimeGrid::new(1.0, 50).unwrap(), r0, &[mu], &[sigma]).unwrap()
}

fn discount() -> impl Strategy<Value = DiscountFunction> {
    prop_oneof![
        (0.0..1.0f64).prop_map(|r| DiscountFunction::exponential(r, 1.0).unwrap()),
        (0.1..3.0f64, 0.1..2.0f64).prop_map(|(k, b)| DiscountFunction::hyperbolic(k, b, 1.0).unwrap()),
        (0.05..0.95f64, 0.0..0.5f64, 0.5..2.0f64)
            .prop_map(|(w, a, b)| DiscountFunction::mixture(vec![w, 1.0 - w], vec![a, b], 1.0).unwrap()),
    ]
}

fn utility() -> impl Strategy<Value = Utility> {
    prop_oneof![
        (0.5..3.0f64, 0.1..0.9f64).prop_map(|(a, g)| Utility::power(a, g).unwrap()),
        (0.5..3.0f64).prop_map(|a| Utility::log(a).unwrap()),
        (0.5..3.0f64, 0.5..3.0f64).prop_map(|(a, g)| Utility::exponential(a, g).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn investment_ignores_discounting(
        d1 in discount(),
        d2 in discount(),
        u in utility(),
        r0 in 0.0..0.06f64,
        premium in 0.01..0.1f64,
        sigma in 0.1..0.4f64,
        t in 0.0..1.0f64,
        x in 0.2..3.0f64,
    ) {
        let m = market(r0, r0 + premium, sigma);
        let p1 = EquilibriumPolicy::closed_form(&m, &d1, &u).unwrap();
        let p2 = EquilibriumPolicy::closed_form(&m, &d2, &u).unwrap();
        let (mut a, mut b) = ([0.0], [0.0]);
        p1.investment(t, x, &mut a).unwrap();
        p2.investment(t, x, &mut b).unwrap();
        prop_assert!((a[0] - b[0]).abs() <= 1e-12 * (1.0 + a[0].abs()));
    }

    #[test]
    fn curve_integral_is_additive(
        values in prop::collection::vec(-2.0..2.0f64, 2..8),
        a in 0.0..1.0f64,
        b in 0.0..1.0f64,
        c in 0.0..1.0f64,
    ) {
        let knots: Vec<f64> = (0..values.len()).map(|i| i as f64 / (values.len() - 1) as f64).collect();
        let f = Curve::linear(knots, values).unwrap();
        let whole = f.integral(a, c);
        let split = f.integral(a, b) + f.integral(b, c);
        prop_assert!((whole - split).abs() <= 1e-12);
        prop_assert!((f.integral(a, b) + f.integral(b, a)).abs() <= 1e-14);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials(
        order in 1usize..9,
        coeffs in prop::collection::vec(-1.0..1.0f64, 16),
        lo in -1.0..1.0f64,
        len in 0.1..2.0f64,
    ) {
        let deg = 2 * order - 1;
        let c = &coeffs[..=deg];
        let p = |x: f64| c.iter().rev().fold(0.0, |acc, k| acc * x + k);
        let hi = lo + len;
        let antideriv = |x: f64| c.iter().enumerate().map(|(i, k)| k * x.powi(i as i32 + 1) / (i + 1) as f64).sum::<f64>();
        let exact = antideriv(hi) - antideriv(lo);
        let gl = GaussLegendre::new(order).integrate(p, lo, hi, 1);
        prop_assert!((gl - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{gl} vs {exact}");
    }

    #[test]
    fn pi_stays_positive(
        d in discount(),
        a in 0.2..5.0f64,
        gamma in 0.05..0.95f64,
        r0 in 0.0..0.08f64,
        premium in 0.005..0.2f64,
    ) {
        let m = market(r0, r0 + premium, 0.3);
        let c = closedform::solve_power(&m, &d, a, gamma).unwrap();
        prop_assert!(c.pi.values().iter().all(|p| *p > 0.0 && p.is_finite()));
    }

    #[test]
    fn power_policy_is_homogeneous(
        d in discount(),
        gamma in 0.1..0.9f64,
        t in 0.0..1.0f64,
        x in 0.1..5.0f64,
        scale in 0.1..10.0f64,
    ) {
        let m = market(0.03, 0.08, 0.25);
        let p = EquilibriumPolicy::closed_form(&m, &d, &Utility::power(1.0, gamma).unwrap()).unwrap();
        let c1 = p.consumption(t, scale * x).unwrap();
        let c2 = scale * p.consumption(t, x).unwrap();
        prop_assert!((c1 - c2).abs() <= 1e-12 * c2);
        let (mut u1, mut u2) = ([0.0], [0.0]);
        p.investment(t, scale * x, &mut u1).unwrap();
        p.investment(t, x, &mut u2).unwrap();
        prop_assert!((u1[0] - scale * u2[0]).abs() <= 1e-12 * u1[0].abs());
    }
}

#[test]
fn single_precision_matches_double() {
    let g = grid::TimeGrid::<f32>::new(1.0, 100).unwrap();
    let m = model::MarketModel::<f32>::constant(g, 0.03, &[0.08], &[0.25]).unwrap();
    let d = model::DiscountFunction::<f32>::hyperbolic(1.0, 1.0, 1.0).unwrap();
    let u = model::Utility::<f32>::power(1.0, 0.5).unwrap();
    let p32 = equilibrium::EquilibriumPolicy::closed_form(&m, &d, &u).unwrap();
    let p64 = EquilibriumPolicy::closed_form(&m.cast(), &d.cast(), &u.cast()).unwrap();
    for t in [0.0f32, 0.3, 0.9] {
        let c32 = p32.consumption(t, 1.5).unwrap();
        let c64 = p64.consumption(t as f64, 1.5).unwrap();
        assert!(((c32 as f64 - c64) / c64).abs() < 1e-5, "{c32} vs {c64}");
    }
}
