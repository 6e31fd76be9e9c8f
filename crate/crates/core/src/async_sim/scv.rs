//! Monte-Carlo check of the gradient-error bound under coordinate-independent
//! staleness.
//!
//! When the values read at update `t` do not depend on the coordinate chosen
//! at `t`, the expected squared gradient error is bounded by the expected
//! squared steps of nearby updates:
//!
//! ```text
//! E[(g_t − g̃_t)²] ≤ (3q·L_res²/n) · Σ_{s ∈ [t−2q+1, t+q−1], s ≠ t} E[(Δx_s)²]
//! ```

use rayon::prelude::*;
use serde::Serialize;

use crate::async_sim::sim::{run_async_sim, DelayPolicy};
use crate::error::{Error, Result};
use crate::lipschitz::profile;
use crate::objective::ProblemInstance;
use crate::seq_solver::{contraction, SolverConfig};

pub const MIN_SEEDS: usize = 100;
/// Required fraction of sampled times at which the bound holds.
pub const PASS_FRACTION: f64 = 0.95;
/// Number of sampled times per check.
const SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScvSample {
    pub t: usize,
    pub mean_err_sq: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScvReport {
    pub q: usize,
    pub seeds: usize,
    pub l_res: f64,
    /// Multiplicative Monte-Carlo allowance `1 + 3/√seeds`.
    pub slack: f64,
    pub samples: Vec<ScvSample>,
    pub fraction_ok: f64,
    pub pass: bool,
    /// Mean over seeds of `Σ_t (Γ/8)·Δx_t²·w^{T−t}` with `w = 1 − α/(2n)`.
    pub amortized_movement: f64,
    /// Mean over seeds of `Σ_t err_t²/Γ·w^{T−t}`.
    pub amortized_error: f64,
    /// Whether the movement sum covers the error sum.
    pub amortization_holds: bool,
}

/// Runs `seeds` simulations (seeds `0..seeds`, start at the origin) with the
/// coordinate-independent staleness policy and compares both sides at evenly
/// spaced times whose window lies inside the run.
pub fn scv_error_bound_check(
    p: &ProblemInstance,
    gamma: f64,
    q: usize,
    iterations: usize,
    seeds: usize,
) -> Result<ScvReport> {
    if seeds < MIN_SEEDS {
        return Err(Error::InvalidInput(format!("need at least {MIN_SEEDS} seeds, got {seeds}")));
    }
    let n = p.n();
    let l_res = profile(p.smooth())?.l_res;
    let policy = DelayPolicy::ScvUniform { q };
    let decay = match (p.mu_f(), p.mu_big_f()) {
        (Some(mu_f), Some(mu_big_f)) => 1.0 - contraction(mu_big_f, mu_f, gamma) / (2.0 * n as f64),
        _ => 1.0,
    };

    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = SolverConfig::new(gamma, iterations, seed, n);
            run_async_sim(p, &cfg, &policy).map(|tr| {
                let recs = &tr.trace.records;
                (recs.iter().map(|r| r.grad_err_sq()).collect(), recs.iter().map(|r| r.dx * r.dx).collect())
            })
        })
        .collect::<Result<_>>()?;

    let mean = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; iterations];
        for run in &runs {
            for (a, v) in acc.iter_mut().zip(pick(run)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / seeds as f64).collect()
    };
    let err_mean = mean(&|r| &r.0);
    let dx_mean = mean(&|r| &r.1);

    let slack = 1.0 + 3.0 / (seeds as f64).sqrt();
    let coef = 3.0 * q as f64 * l_res * l_res / n as f64;
    let lo_t = (2 * q).saturating_sub(1);
    let hi_t = iterations.saturating_sub(q);
    let mut samples = Vec::new();
    if hi_t > lo_t {
        let stride = ((hi_t - lo_t) / SAMPLES).max(1);
        for t in (lo_t..hi_t).step_by(stride) {
            let window = (t + 1).saturating_sub(2 * q)..(t + q).min(iterations);
            let sum: f64 = window.filter(|&s| s != t).map(|s| dx_mean[s]).sum();
            let rhs = coef * sum;
            let lhs = err_mean[t];
            samples.push(ScvSample { t, mean_err_sq: lhs, rhs, holds: lhs <= rhs * slack });
        }
    }
    let ok = samples.iter().filter(|s| s.holds).count();
    let fraction_ok = if samples.is_empty() { 1.0 } else { ok as f64 / samples.len() as f64 };

    let mut movement = 0.0;
    let mut error = 0.0;
    let mut weight = 1.0;
    for t in (0..iterations).rev() {
        movement += 0.125 * gamma * dx_mean[t] * weight;
        error += err_mean[t] / gamma * weight;
        weight *= decay;
    }

    Ok(ScvReport {
        q,
        seeds,
        l_res,
        slack,
        samples,
        fraction_ok,
        pass: fraction_ok >= PASS_FRACTION,
        amortized_movement: movement,
        amortized_error: error,
        amortization_holds: movement >= error,
    })
}
