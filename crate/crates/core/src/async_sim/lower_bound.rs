//! The hard instance for large overlap and the stall demonstration.
//!
//! `f(x) = ½xᵀLx` with unit diagonal and every off-diagonal entry equal to
//! `ε = 1/√(c·n·ln n)`, i.e. `L = ε·J + (1 − ε)·I` with `J` the all-ones
//! matrix. The start point is a balanced `±1` vector, so `Σ x0 = 0` and the
//! optimum is `x = 0` with value `0`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::async_sim::sim::{adversarial_policy, run_async_sim, DelayPolicy};
use crate::error::{Error, Result};
use crate::objective::{ProblemInstance, Regularizer, SmoothPart};
use crate::rng::{stream_rng, AUX_STREAM};
use crate::seq_solver::SolverConfig;
use crate::sparse::CsrMatrix;

/// Step parameter used by the demonstration (at least twice `L_max = 1`).
pub const STALL_GAMMA: f64 = 2.0;
/// The adversarial reduction must be at most this fraction of the baseline's.
pub const STALL_RATIO_THRESHOLD: f64 = 0.1;

pub fn off_diagonal(n: usize, c: f64) -> f64 {
    1.0 / (c * n as f64 * (n as f64).ln()).sqrt()
}

pub fn lower_bound_instance(n: usize, c: f64, seed: u64) -> Result<(ProblemInstance, Vec<f64>)> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("n must be even and at least 4, got {n}")));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidInput(format!("c must be at least 1, got {c}")));
    }
    let eps = off_diagonal(n, c);
    let trips = (0..n).flat_map(|i| (0..n).map(move |j| (i, j, if i == j { 1.0 } else { eps })));
    let l = CsrMatrix::from_triplets(n, n, trips)?;
    let p = ProblemInstance::new(SmoothPart::quadratic(l, vec![0.0; n])?, vec![Regularizer::Zero; n])?
        .with_strong_convexity(1.0 - eps, 1.0 - eps)?
        .with_f_star(0.0);
    let mut x0: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
    x0.shuffle(&mut stream_rng(seed, AUX_STREAM + 2));
    Ok((p, x0))
}

/// `⌈√(n ln n)⌉`.
pub fn stall_overlap(n: usize) -> usize {
    ((n as f64) * (n as f64).ln()).sqrt().ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StallPair {
    pub seed: u64,
    pub f_initial: f64,
    pub adversarial_final: f64,
    pub baseline_final: f64,
    /// Adversarial reduction over baseline reduction.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StallReport {
    pub n: usize,
    pub c: f64,
    pub q: usize,
    pub iterations: usize,
    pub pairs: Vec<StallPair>,
    pub median_ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Paired runs on the hard instance: the adversary with overlap `q` against
/// random staleness with overlap 1, same start point and coordinate sequence.
pub fn stall_demo(
    n: usize,
    c: f64,
    q: usize,
    iterations: usize,
    seeds: &[u64],
    target_amplitude: f64,
) -> Result<StallReport> {
    if seeds.is_empty() {
        return Err(Error::Config("stall demo needs at least one seed".into()));
    }
    let adversary = adversarial_policy(q, target_amplitude);
    let baseline = DelayPolicy::UniformRandom { q: 1 };
    let mut pairs: Vec<StallPair> = seeds
        .par_iter()
        .map(|&seed| {
            let (p, x0) = lower_bound_instance(n, c, seed)?;
            let cfg = SolverConfig::new(STALL_GAMMA, iterations, seed, n)
                .with_x0(x0)
                .with_record_every(iterations.max(1));
            let adv = run_async_sim(&p, &cfg, &adversary)?.trace;
            let base = run_async_sim(&p, &cfg, &baseline)?.trace;
            let ratio = (adv.f_initial - adv.f_final) / (base.f_initial - base.f_final);
            Ok(StallPair {
                seed,
                f_initial: adv.f_initial,
                adversarial_final: adv.f_final,
                baseline_final: base.f_final,
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    pairs.sort_by_key(|p| p.seed);
    let median_ratio = median(pairs.iter().map(|p| p.ratio).collect());
    Ok(StallReport {
        n,
        c,
        q,
        iterations,
        pairs,
        median_ratio,
        threshold: STALL_RATIO_THRESHOLD,
        pass: median_ratio <= STALL_RATIO_THRESHOLD,
    })
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
