mod common;

use acd::prox::{oracle_bracket, prox_oracle, prox_step, w_hat, w_value, StepContext};
use acd::Regularizer;
use common::{prox_violations, reg_of, ContextPair};
use proptest::prelude::*;

fn pair_strategy() -> impl Strategy<Value = ContextPair> {
    (0usize..4, 0.0..5.0f64, 0.1..10.0f64, -5.0..5.0f64, -10.0..10.0f64, -5.0..5.0f64, -10.0..10.0f64).prop_map(
        |(v, lambda, gamma, x1, g1, x2, g2)| ContextPair { gamma, reg: reg_of(v, lambda), x1, g1, x2, g2 },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn invariants_hold(pair in pair_strategy()) {
        let bad = prox_violations(&pair, true);
        prop_assert!(bad.is_empty(), "{:?}: {:?}", pair, bad);
    }

    #[test]
    fn step_minimizes_w(pair in pair_strategy(), probe in -20.0..20.0f64) {
        let ctx = StepContext::new(pair.gamma, pair.reg, pair.x1, pair.g1);
        let d = prox_step(&ctx).unwrap();
        prop_assert!(w_value(d, &ctx) <= w_value(probe, &ctx) + 1e-9 * (1.0 + w_value(probe, &ctx).abs()));
        prop_assert_eq!(w_value(0.0, &ctx), 0.0);
        prop_assert!((w_hat(&ctx).unwrap() + w_value(d, &ctx)).abs() == 0.0);
    }

    #[test]
    fn kink_is_sticky_inside_subdifferential(lambda in 0.1..5.0f64, frac in -0.99..0.99f64, gamma in 0.1..10.0f64) {
        // x = 0 with g strictly inside [−λ, λ] keeps the L1 coordinate at zero.
        let ctx = StepContext::new(gamma, Regularizer::L1 { lambda }, 0.0, frac * lambda);
        prop_assert_eq!(prox_step(&ctx).unwrap(), 0.0);
        prop_assert_eq!(w_hat(&ctx).unwrap(), 0.0);
    }
}

#[test]
fn oracle_matches_closed_forms_on_reference_examples() {
    let cases = [
        (StepContext::new(4.0, Regularizer::Zero, 0.0, 2.0), -0.5),
        (StepContext::new(3.0, Regularizer::SquaredL2 { lambda: 2.0 }, 1.0, 1.0), -0.6),
        (StepContext::new(1.0, Regularizer::L1 { lambda: 0.3 }, 1.0, 0.0), -0.3),
        (StepContext::new(1.0, Regularizer::Hinge { lambda: 1.0 }, 0.1, 0.0), -0.1),
    ];
    for (ctx, expected) in cases {
        let d = prox_oracle(&ctx, -10.0, 10.0, 1e-8).unwrap();
        assert!((d - expected).abs() <= 1e-8, "{ctx:?}: {d}");
        assert!((prox_step(&ctx).unwrap() - expected).abs() < 1e-15);
    }
}

#[test]
fn bracket_covers_the_documented_interval() {
    let ctx = StepContext::new(2.0, Regularizer::L1 { lambda: 1.5 }, -0.7, 3.0);
    let (lo, hi) = oracle_bracket(&ctx);
    let reach = (3.0 + 1.5) / 2.0 + 1.0;
    assert!(lo <= -reach && hi >= reach);
}
