//! A self-contained invariant suite, sized to run in seconds.

use rand::Rng;
use serde::Serialize;

use crate::async_sim::{
    check_progress_lemmas, generate_schedule, interference_report, run_async_sim, scc_order, DelayPolicy,
    SpanModel,
};
use crate::error::Result;
use crate::harness::generators::{gen_lasso, gen_random_quadratic};
use crate::objective::Regularizer;
use crate::parallel_rt::{run_parallel, verify_write_chains, RuntimeConfig};
use crate::prox::{oracle_bracket, prox_oracle, prox_step, w_hat, StepContext};
use crate::rng::{stream_rng, AUX_STREAM};
use crate::seq_solver::{run_sequential, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

fn random_reg(rng: &mut impl Rng) -> Regularizer {
    let lambda = rng.gen_range(0.0..2.0);
    match rng.gen_range(0..4) {
        0 => Regularizer::Zero,
        1 => Regularizer::L1 { lambda },
        2 => Regularizer::SquaredL2 { lambda },
        _ => Regularizer::Hinge { lambda },
    }
}

fn prox_invariants(samples: usize, seed: u64) -> CheckResult {
    let mut rng = stream_rng(seed, AUX_STREAM + 10);
    let mut failures = 0;
    for _ in 0..samples {
        let gamma = rng.gen_range(0.1..5.0);
        let reg = random_reg(&mut rng);
        let ctx = StepContext::new(gamma, reg, rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0));
        let d = prox_step(&ctx).expect("gamma > 0");
        let w = w_hat(&ctx).expect("gamma > 0");
        let (lo, hi) = oracle_bracket(&ctx);
        let oracle = prox_oracle(&ctx, lo, hi, 1e-9).expect("bracket contains the minimizer");
        if w < -1e-12 || w < 0.5 * gamma * d * d - 1e-9 || (oracle - d).abs() > 1e-6 {
            failures += 1;
        }
    }
    CheckResult { name: "prox", pass: failures == 0, detail: format!("{failures} of {samples} contexts failed") }
}

fn scc_invariants(schedules: usize, seed: u64) -> CheckResult {
    let mut rng = stream_rng(seed, AUX_STREAM + 11);
    let mut failures = 0;
    for i in 0..schedules {
        let cores = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=20);
        let t = rng.gen_range(1..=300);
        let span = SpanModel::Bimodal { d1: 1.0, d2: 10.0, p: 0.5 };
        let s = generate_schedule(n, t, cores, span, seed ^ i as u64).expect("valid schedule");
        let order = scc_order(&s);
        let mut seen = vec![false; order.len()];
        order.iter().for_each(|&u| seen[u] = true);
        if !seen.iter().all(|&b| b) || !interference_report(&s).scc_range_ok {
            failures += 1;
        }
    }
    CheckResult { name: "scc", pass: failures == 0, detail: format!("{failures} of {schedules} schedules failed") }
}

fn lemma_invariants(seed: u64) -> Result<CheckResult> {
    let quad = gen_random_quadratic(40, 5, 0.1, 1.0, seed)?;
    let lasso = gen_lasso(30, 25, 0.2, 0.1, seed)?;
    let policies = [
        DelayPolicy::Synchronous,
        DelayPolicy::UniformRandom { q: 3 },
        DelayPolicy::ScvUniform { q: 2 },
        DelayPolicy::Adversarial { q: 3, target_amplitude: 0.0 },
    ];
    let mut runs = 0;
    let mut failures = 0;
    for (pi, p) in [&quad, &lasso].into_iter().enumerate() {
        let gamma = p.l_max();
        for policy in &policies {
            if pi == 1 && matches!(policy, DelayPolicy::Adversarial { .. }) {
                continue;
            }
            let cfg = SolverConfig::new(gamma, 2000, seed, p.n());
            let tr = run_async_sim(p, &cfg, policy)?;
            runs += 1;
            if !check_progress_lemmas(&tr.trace, p, gamma)?.pass {
                failures += 1;
            }
        }
    }
    Ok(CheckResult { name: "progress-lemmas", pass: failures == 0, detail: format!("{failures} of {runs} traces failed") })
}

fn sync_equivalence(seed: u64) -> Result<CheckResult> {
    let p = gen_lasso(30, 25, 0.2, 0.1, seed)?;
    let cfg = SolverConfig::new(p.l_max(), 3000, seed, p.n());
    let same = run_sequential(&p, &cfg)? == run_async_sim(&p, &cfg, &DelayPolicy::Synchronous)?.trace;
    Ok(CheckResult { name: "sync-equivalence", pass: same, detail: format!("bit-identical: {same}") })
}

fn write_chains(seed: u64) -> Result<CheckResult> {
    let p = gen_lasso(200, 150, 0.05, 0.05, seed)?;
    let mut cfg = RuntimeConfig::new(4, p.l_max(), 20_000, seed, p.n());
    cfg.log_writes = true;
    let r = run_parallel(&p, &cfg)?;
    let rep = verify_write_chains(&cfg.x0, &r.final_x, r.write_log.as_deref().unwrap_or(&[]));
    Ok(CheckResult {
        name: "write-chains",
        pass: rep.ok && r.updates == 20_000,
        detail: format!("{} coordinates written, {} broken, q_emp = {}", rep.coords_written, rep.broken.len(), r.q_emp),
    })
}

pub fn run_check_suite(seed: u64) -> Result<SuiteReport> {
    let checks = vec![
        prox_invariants(20_000, seed),
        scc_invariants(500, seed),
        lemma_invariants(seed)?,
        sync_equivalence(seed)?,
        write_chains(seed)?,
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(SuiteReport { checks, pass })
}
