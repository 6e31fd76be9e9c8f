use acd::async_sim::{adversarial_policy, check_progress_lemmas, run_async_sim, DelayPolicy};
use acd::harness::{gen_lasso, gen_random_quadratic};
use acd::prox::{prox_step, w_hat, StepContext};
use acd::rng::KeyedRng;
use acd::seq_solver::run_sequential;
use acd::{Error, ProblemInstance, SolverConfig, Trace, UpdateRecord};
use proptest::prelude::*;

fn policy_strategy() -> impl Strategy<Value = DelayPolicy> {
    (0usize..4, 1usize..6).prop_map(|(v, q)| match v {
        0 => DelayPolicy::Synchronous,
        1 => DelayPolicy::UniformRandom { q },
        2 => DelayPolicy::ScvUniform { q },
        _ => DelayPolicy::Adversarial { q, target_amplitude: 0.0 },
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn staleness_stays_within_the_window(seed in 0u64..500, policy in policy_strategy()) {
        let p = gen_random_quadratic(25, 5, 0.1, 1.0, seed).unwrap();
        let tr = run_async_sim(&p, &SolverConfig::new(p.l_max(), 600, seed, 25), &policy).unwrap();
        for r in &tr.trace.records {
            prop_assert!(r.max_staleness >= 1 && r.max_staleness <= policy.q() + 1);
            prop_assert!(r.max_staleness <= r.t + 1);
            if r.stale_reads == 0 {
                prop_assert_eq!(r.g, r.g_tilde);
            }
        }
    }

    #[test]
    fn simulations_are_deterministic(seed in 0u64..500, policy in policy_strategy()) {
        let p = gen_random_quadratic(20, 3, 0.1, 1.0, seed).unwrap();
        let cfg = SolverConfig::new(1.5 * p.l_max(), 400, seed, 20);
        prop_assert_eq!(run_async_sim(&p, &cfg, &policy).unwrap(), run_async_sim(&p, &cfg, &policy).unwrap());
    }

    #[test]
    fn lemmas_hold_on_lasso(seed in 0u64..500, q in 1usize..6, scv in any::<bool>()) {
        let p = gen_lasso(30, 20, 0.3, 0.2, seed).unwrap();
        let policy = if scv { DelayPolicy::ScvUniform { q } } else { DelayPolicy::UniformRandom { q } };
        let tr = run_async_sim(&p, &SolverConfig::new(p.l_max(), 500, seed, 20), &policy).unwrap();
        prop_assert!(check_progress_lemmas(&tr.trace, &p, p.l_max()).unwrap().pass);
    }
}

#[test]
fn synchronous_policy_reproduces_the_sequential_solver() {
    for seed in 0..5 {
        let p = gen_lasso(40, 30, 0.2, 0.1, seed).unwrap();
        let cfg = SolverConfig::new(p.l_max(), 2000, seed, 30);
        assert_eq!(run_async_sim(&p, &cfg, &DelayPolicy::Synchronous).unwrap().trace, run_sequential(&p, &cfg).unwrap());
    }
}

#[test]
fn zero_overlap_adversary_is_synchronous() {
    assert_eq!(adversarial_policy(0, 0.5), DelayPolicy::Synchronous);
    assert_eq!(adversarial_policy(3, 0.5), DelayPolicy::Adversarial { q: 3, target_amplitude: 0.5 });
}

#[test]
fn adversary_needs_a_quadratic() {
    let p = gen_lasso(10, 8, 0.5, 0.1, 1).unwrap();
    let cfg = SolverConfig::new(p.l_max(), 10, 1, 8);
    assert!(run_async_sim(&p, &cfg, &DelayPolicy::Adversarial { q: 2, target_amplitude: 0.0 }).is_err());
}

#[test]
fn stale_reads_actually_occur() {
    let p = gen_random_quadratic(10, 9, 0.1, 1.0, 3).unwrap();
    let tr = run_async_sim(&p, &SolverConfig::new(p.l_max(), 2000, 3, 10), &DelayPolicy::UniformRandom { q: 4 }).unwrap();
    assert!(tr.trace.records.iter().any(|r| r.g != r.g_tilde));
}

/// Runs plain coordinate descent with a step parameter below `L_max`, which
/// the solvers refuse, and assembles the trace by hand.
fn undersized_trace(p: &ProblemInstance, gamma: f64, iterations: usize) -> Trace {
    let n = p.n();
    let cfg = SolverConfig { gamma, iterations, seed: 4, record_every: 1, x0: vec![1.0; n] };
    let mut rng = KeyedRng::new(cfg.seed);
    let mut x = cfg.x0.clone();
    let f_initial = p.eval_objective(&x).unwrap();
    let mut records = Vec::new();
    for t in 0..iterations {
        let k = rng.coordinate(t as u64, n);
        let g = p.grad_coord(&x, k).unwrap();
        let ctx = StepContext::new(gamma, *p.reg(k), x[k], g);
        let dx = prox_step(&ctx).unwrap();
        let x_before = x[k];
        x[k] += dx;
        records.push(UpdateRecord {
            t,
            k,
            g,
            g_tilde: g,
            x_before,
            dx,
            f_after: p.eval_objective(&x).unwrap(),
            w_hat: w_hat(&ctx).unwrap(),
            max_staleness: 1,
            stale_reads: 0,
        });
    }
    let f_final = p.eval_objective(&x).unwrap();
    Trace { records, config: cfg, f_initial, f_final, final_x: x }
}

#[test]
fn undersized_step_parameter_is_caught() {
    let p = gen_random_quadratic(12, 5, 0.1, 1.0, 4).unwrap();
    let tr = undersized_trace(&p, 0.3, 200);
    let rep = check_progress_lemmas(&tr, &p, 0.3).unwrap();
    assert!(rep.gamma_below_l_max);
    assert!(!rep.pass);
    assert!(rep.certificate.violations > 0);

    let mut tampered = undersized_trace(&p, 0.3, 50);
    tampered.records[49].dx *= 2.0;
    assert!(matches!(check_progress_lemmas(&tampered, &p, 0.3), Err(Error::Replay { t: 49, .. })));
}
