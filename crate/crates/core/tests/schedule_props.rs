use acd::async_sim::schedule::commit_order_coord_counts;
use acd::async_sim::{generate_schedule, interference_report, scc_order, Schedule, SpanModel};
use proptest::prelude::*;

fn span_strategy() -> impl Strategy<Value = SpanModel> {
    prop_oneof![
        (0.1..5.0f64).prop_map(|d| SpanModel::Constant { d }),
        (0.1..2.0f64, 0.0..5.0f64).prop_map(|(lo, w)| SpanModel::Uniform { lo, hi: lo + w }),
        (0.1..2.0f64, 1.0..10.0f64, 0.0..1.0f64).prop_map(|(d1, r, p)| SpanModel::Bimodal { d1, d2: d1 * r, p }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn scc_is_a_per_coordinate_rearrangement(n in 1usize..30, t in 1usize..300, cores in 1usize..9,
                                             span in span_strategy(), seed in any::<u64>()) {
        let s = generate_schedule(n, t, cores, span, seed).unwrap();
        prop_assert_eq!(s.len(), t);
        let order = scc_order(&s);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..t).collect::<Vec<_>>());
        for (pos, &u) in order.iter().enumerate() {
            prop_assert_eq!(s.scc_times()[u], pos);
            // The update placed here works on the same coordinate as the one
            // that started here.
            prop_assert_eq!(s.updates()[u].coord, s.updates()[s.start_order()[pos]].coord);
        }
        let rep = interference_report(&s);
        prop_assert!(rep.scc_range_ok && rep.start_range_ok);
        prop_assert_eq!(rep.q_emp, s.q());
        for (u, set) in rep.interferers_scc.iter().enumerate() {
            prop_assert!(set.len() <= s.q(), "update {} has {} interferers, q = {}", u, set.len(), s.q());
        }
    }

    #[test]
    fn constant_spans_on_two_cores_overlap_at_most_two(d in 0.1..5.0f64, t in 1usize..400, seed in any::<u64>()) {
        let s = generate_schedule(8, t, 2, SpanModel::Constant { d }, seed).unwrap();
        prop_assert!(s.q() <= 2);
    }

    #[test]
    fn bimodal_overlap_respects_the_span_ceiling(r in 1.0..10.0f64, p in 0.0..1.0f64, seed in any::<u64>()) {
        let span = SpanModel::Bimodal { d1: 1.0, d2: r, p };
        let cores = 3;
        let s = generate_schedule(10, 1000, cores, span, seed).unwrap();
        // Each other core commits at most ⌈ratio⌉ + 1 times inside one span.
        let ceiling = (cores as f64 * (span.span_ratio().ceil() + 1.0)) as usize;
        prop_assert!(s.q() <= ceiling, "q = {} > {}", s.q(), ceiling);
    }

    #[test]
    fn commit_counts_cover_the_prefix(t in 1usize..300, prefix in 0usize..300, seed in any::<u64>()) {
        let s = generate_schedule(7, t, 4, SpanModel::Uniform { lo: 0.5, hi: 3.0 }, seed).unwrap();
        let counts = commit_order_coord_counts(&s, prefix);
        prop_assert_eq!(counts.len(), 7);
        prop_assert_eq!(counts.iter().sum::<usize>(), prefix.min(t));
    }
}

#[test]
fn single_core_orders_coincide() {
    let s = generate_schedule(5, 100, 1, SpanModel::Bimodal { d1: 1.0, d2: 10.0, p: 0.5 }, 3).unwrap();
    assert_eq!(s.q(), 0);
    assert_eq!(s.start_order(), s.commit_order());
    assert_eq!(scc_order(&s), s.start_order());
    assert!(interference_report(&s).interferers_scc.iter().all(|v| v.is_empty()));
}

#[test]
fn json_round_trip() {
    let s = generate_schedule(6, 80, 4, SpanModel::Uniform { lo: 0.5, hi: 2.0 }, 9).unwrap();
    let back = Schedule::from_json(6, &s.to_json().unwrap()).unwrap();
    assert_eq!(back.updates(), s.updates());
    assert_eq!(scc_order(&back), scc_order(&s));
}

#[test]
fn invalid_span_models_are_rejected() {
    assert!(generate_schedule(3, 10, 2, SpanModel::Constant { d: 0.0 }, 1).is_err());
    assert!(generate_schedule(3, 10, 2, SpanModel::Uniform { lo: 2.0, hi: 1.0 }, 1).is_err());
    assert!(generate_schedule(3, 10, 2, SpanModel::Bimodal { d1: 1.0, d2: 2.0, p: 1.5 }, 1).is_err());
    assert!(generate_schedule(3, 10, 0, SpanModel::Constant { d: 1.0 }, 1).is_err());
}
